//! File formats, configuration, the parallel Monte Carlo harness and the
//! command-line interface around [`itr_core`].

pub mod cli;
pub mod config;
pub mod harness;
pub mod io;
pub mod report;

/// Errors surfaced by the command-line tool, tagged with the stage that
/// produced them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(String),
    #[error("data: {0}")]
    Parse(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{module}: {source}", module = core_module(.source))]
    Core {
        #[from]
        source: itr_core::Error,
    },
}

fn core_module(e: &itr_core::Error) -> &'static str {
    use itr_core::Error as E;
    match e {
        E::Config(_) => "config",
        E::Data { .. } | E::Dataset(_) => "data",
        E::Dimension(_) | E::UnknownOracle(_) | E::FoldTooSmall { .. } => "nuisance",
        E::InfeasibleBudget { .. } => "validation",
        E::NonPositiveCostContrast(_) | E::UnboundedRandomReference => "reference",
        E::TooFewObservations { .. } => "tmle",
    }
}

impl Error {
    /// `2` for an infeasible budget, `1` for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core {
                source: itr_core::Error::InfeasibleBudget { .. },
            } => 2,
            _ => 1,
        }
    }
}
