use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data at row {row}: {msg}")]
    Data { row: usize, msg: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// No rule satisfies the constraint when `alpha * phi >= kappa`.
    #[error("infeasible budget: alpha*phi = {alpha_phi} is not below kappa = {kappa}")]
    InfeasibleBudget { alpha_phi: f64, kappa: f64 },

    #[error("unknown oracle: {0}")]
    UnknownOracle(String),

    #[error("cross-fit fold {fold} leaves {train} training rows, learner needs at least {needed}")]
    FoldTooSmall {
        fold: usize,
        train: usize,
        needed: usize,
    },

    #[error("mean cost contrast {0} is not positive")]
    NonPositiveCostContrast(f64),

    #[error("random reference rule requires a finite budget")]
    UnboundedRandomReference,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
}
