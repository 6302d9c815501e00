//! Observations, datasets, problem configuration and the validation guards
//! for positivity, cost margin and budget feasibility.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knapsack::phi_one_step;
use crate::nuisance::NuisanceValues;

/// One data unit `(W, T, C, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub w: Vec<f64>,
    pub t: u8,
    pub c: f64,
    pub y: f64,
}

impl Observation {
    pub fn new(w: Vec<f64>, t: u8, c: f64, y: f64) -> Self {
        Self { w, t, c, y }
    }

    #[inline]
    pub fn t_f64(&self) -> f64 {
        f64::from(self.t)
    }

    fn check(&self, row: usize) -> Result<()> {
        if self.t > 1 {
            return Err(Error::Data {
                row,
                msg: format!("treatment not in {{0,1}} at row {row}"),
            });
        }
        if !self.c.is_finite() || !self.y.is_finite() || self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data {
                row,
                msg: "non-finite value".into(),
            });
        }
        if self.c < 0.0 {
            return Err(Error::Data {
                row,
                msg: format!("negative cost {} at row {row}", self.c),
            });
        }
        Ok(())
    }
}

/// An immutable, validated sample together with the coordinates of `W`
/// that make up the decision covariate `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    v_index: Vec<usize>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        observations: Vec<Observation>,
        v_index: Vec<usize>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Dataset("dataset has no observations".into()));
        }
        let p = observations[0].w.len();
        if covariate_names.len() != p {
            return Err(Error::Dataset(format!(
                "{} covariate names for dimension {p}",
                covariate_names.len()
            )));
        }
        for (row, o) in observations.iter().enumerate() {
            if o.w.len() != p {
                return Err(Error::Data {
                    row,
                    msg: format!("covariate dimension {} differs from {p}", o.w.len()),
                });
            }
            o.check(row)?;
        }
        if v_index.is_empty() {
            return Err(Error::Dataset("decision covariate set is empty".into()));
        }
        let mut seen = alloc::vec![false; p];
        for &j in &v_index {
            if j >= p {
                return Err(Error::Dataset(format!("v index {j} out of range for dimension {p}")));
            }
            if core::mem::replace(&mut seen[j], true) {
                return Err(Error::Dataset(format!("v index {j} repeated")));
            }
        }
        Ok(Self {
            observations,
            v_index,
            covariate_names,
        })
    }

    /// Dataset with default covariate names `w1..wp` and `V = W`.
    pub fn with_full_v(observations: Vec<Observation>) -> Result<Self> {
        let p = observations.first().map_or(0, |o| o.w.len());
        let names = (1..=p).map(|j| format!("w{j}")).collect();
        Self::new(observations, (0..p).collect(), names)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn dim(&self) -> usize {
        self.observations[0].w.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    #[inline]
    pub fn obs(&self, i: usize) -> &Observation {
        &self.observations[i]
    }

    pub fn v_index(&self) -> &[usize] {
        &self.v_index
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// `V(w)` for an arbitrary covariate vector.
    pub fn v_of(&self, w: &[f64]) -> Vec<f64> {
        self.v_index.iter().map(|&j| w[j]).collect()
    }

    /// True when `V` is `W` up to a reordering of coordinates.
    pub fn v_is_w(&self) -> bool {
        self.v_index.len() == self.dim()
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let obs = idx.iter().map(|&i| self.observations[i].clone()).collect();
        Self::new(obs, self.v_index.clone(), self.covariate_names.clone())
    }
}

/// Reference rule against which the estimated optimal rule is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReferenceKind {
    /// A fixed constant rule `v -> p`.
    FR,
    /// Treat completely at random at the budget-saturating probability.
    RD,
    /// Treat according to the propensity score.
    TP,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 3] = [ReferenceKind::FR, ReferenceKind::RD, ReferenceKind::TP];

    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::FR => "FR",
            ReferenceKind::RD => "RD",
            ReferenceKind::TP => "TP",
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_references() -> Vec<ReferenceKind> {
    ReferenceKind::ALL.to_vec()
}
fn default_eps_t() -> f64 {
    0.01
}
fn default_eps_c() -> f64 {
    1e-3
}
fn default_folds() -> usize {
    10
}

/// Budget, constraint mix, reference rules and numerical guards.
///
/// `kappa` may be `f64::INFINITY` for an unconstrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(with = "crate::math::ext_f64")]
    pub kappa: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_references")]
    pub references: Vec<ReferenceKind>,
    /// Constant used by the fixed reference rule.
    #[serde(default)]
    pub fr_constant: f64,
    #[serde(default = "default_eps_t")]
    pub eps_t: f64,
    #[serde(default = "default_eps_c")]
    pub eps_c: f64,
    #[serde(default)]
    pub y_bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub c_bounds: Option<(f64, f64)>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl ProblemConfig {
    pub fn new(kappa: f64, alpha: f64) -> Self {
        Self {
            kappa,
            alpha,
            references: default_references(),
            fr_constant: 0.0,
            eps_t: default_eps_t(),
            eps_c: default_eps_c(),
            y_bounds: None,
            c_bounds: None,
            folds: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return bad(format!("kappa = {} must be positive", self.kappa));
        }
        if !(self.eps_t > 0.0 && self.eps_t < 0.5) {
            return bad(format!("eps_t = {} outside (0, 0.5)", self.eps_t));
        }
        if !self.eps_c.is_finite() || self.eps_c <= 0.0 {
            return bad(format!("eps_c = {} must be positive", self.eps_c));
        }
        if self.folds < 1 {
            return bad("folds must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.fr_constant) {
            return bad(format!("fr_constant = {} outside [0, 1]", self.fr_constant));
        }
        for (name, b) in [("y_bounds", self.y_bounds), ("c_bounds", self.c_bounds)] {
            if let Some((lo, hi)) = b {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("{name} = [{lo}, {hi}] is not a proper interval"));
                }
            }
        }
        if self.references.is_empty() {
            return bad("at least one reference rule is required".into());
        }
        Ok(())
    }
}

/// Outcome of [`validate_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    /// Observations whose propensity was truncated into `[eps_t, 1 - eps_t]`.
    pub propensity_truncated: usize,
    pub propensity_truncated_frac: f64,
    /// Observations whose `Delta^C(W)` was floored at `eps_c`.
    pub cost_contrast_floored: usize,
    pub cost_contrast_floored_frac: f64,
    /// Observations whose `delta^C(V)` was floored at `eps_c`.
    pub conditional_cost_contrast_floored: usize,
    pub conditional_cost_contrast_floored_frac: f64,
    pub phi_n: f64,
    pub alpha_phi: f64,
    #[serde(with = "crate::math::ext_f64")]
    pub kappa: f64,
    pub feasible: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.feasible
            && self.propensity_truncated == 0
            && self.cost_contrast_floored == 0
            && self.conditional_cost_contrast_floored == 0
    }
}

/// Reports how often the numerical guards fired and fails when the budget
/// cannot cover the never-treat cost (`alpha * phi_n >= kappa`).
pub fn validate_conditions(
    ds: &Dataset,
    cfg: &ProblemConfig,
    nv: &NuisanceValues,
) -> Result<ValidationReport> {
    let n = ds.n();
    let phi_n = phi_one_step(ds, nv);
    let alpha_phi = cfg.alpha * phi_n;
    let frac = |k: usize| k as f64 / n as f64;
    let report = ValidationReport {
        n,
        propensity_truncated: nv.mu_t_truncated,
        propensity_truncated_frac: frac(nv.mu_t_truncated),
        cost_contrast_floored: nv.delta_c_floored,
        cost_contrast_floored_frac: frac(nv.delta_c_floored),
        conditional_cost_contrast_floored: nv.delta_c_v_floored,
        conditional_cost_contrast_floored_frac: frac(nv.delta_c_v_floored),
        phi_n,
        alpha_phi,
        kappa: cfg.kappa,
        feasible: alpha_phi < cfg.kappa,
    };
    if !report.feasible {
        return Err(Error::InfeasibleBudget {
            alpha_phi,
            kappa: cfg.kappa,
        });
    }
    Ok(report)
}
