//! Regression learners for nuisance functions: least squares, logistic
//! regression fit by iteratively reweighted least squares, and an oracle
//! that returns the closed-form truth of a registered simulation DGP.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::expit;
use crate::sim::{self, DgpId, Target};

/// Coefficients are capped at this magnitude on the logit scale.
pub const LOGIT_COEF_CAP: f64 = 30.0;
const RIDGE_JITTER: f64 = 1e-10;

/// Feature map applied to the raw predictors. An intercept is always
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Intercept,
    Main,
    /// Main effects plus all products of distinct predictors.
    Pairwise,
}

impl Basis {
    pub fn width(self, d: usize) -> usize {
        match self {
            Basis::Intercept => 1,
            Basis::Main => 1 + d,
            Basis::Pairwise => 1 + d + d * d.saturating_sub(1) / 2,
        }
    }

    pub fn expand_into(self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if self == Basis::Intercept {
            return;
        }
        out.extend_from_slice(x);
        if self == Basis::Pairwise {
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    out.push(x[i] * x[j]);
                }
            }
        }
    }

    pub fn expand(self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width(x.len()));
        self.expand_into(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Linear,
    Logistic,
    Oracle { dgp: DgpId, target: Target },
}

fn default_basis() -> Basis {
    Basis::Main
}
fn default_max_iter() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, basis: Basis) -> Self {
        Self {
            kind,
            basis,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }

    pub fn linear(basis: Basis) -> Self {
        Self::new(LearnerKind::Linear, basis)
    }

    pub fn logistic(basis: Basis) -> Self {
        Self::new(LearnerKind::Logistic, basis)
    }

    pub fn oracle(dgp: DgpId, target: Target) -> Self {
        Self::new(LearnerKind::Oracle { dgp, target }, Basis::Intercept)
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.kind, LearnerKind::Oracle { .. })
    }

    /// Rows needed to fit this learner on `d` raw predictors.
    pub fn min_rows(&self, d: usize) -> usize {
        if self.is_oracle() {
            0
        } else {
            self.basis.width(d)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Some logistic coefficient hit the cap (separation).
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Linear(Vec<f64>),
    Logistic(Vec<f64>),
    Oracle { dgp: DgpId, target: Target },
}

/// An immutable fitted regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegression {
    model: Model,
    basis: Basis,
    pub diagnostics: FitDiagnostics,
}

impl FittedRegression {
    /// Predict at raw predictors `x`. For `(t, w)` targets `x[0]` is the
    /// treatment.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Linear(b) => dot_basis(self.basis, b, x),
            Model::Logistic(b) => expit(dot_basis(self.basis, b, x)),
            Model::Oracle { dgp, target } => {
                let (t, w) = if target.takes_treatment() {
                    (Some(if x[0] > 0.5 { 1 } else { 0 }), &x[1..])
                } else {
                    (None, x)
                };
                // Registered pairs are checked when the oracle is fit.
                oracle_predict(*dgp, *target, t, w).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Linear(b) | Model::Logistic(b) => Some(b),
            Model::Oracle { .. } => None,
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.model, Model::Oracle { .. })
    }
}

fn dot_basis(basis: Basis, b: &[f64], x: &[f64]) -> f64 {
    let mut acc = b[0];
    if basis == Basis::Intercept {
        return acc;
    }
    let d = x.len();
    for j in 0..d {
        acc += b[1 + j] * x[j];
    }
    if basis == Basis::Pairwise {
        let mut k = 1 + d;
        for i in 0..d {
            for j in i + 1..d {
                acc += b[k] * x[i] * x[j];
                k += 1;
            }
        }
    }
    acc
}

/// Closed-form conditional mean of a registered simulation DGP.
pub fn oracle_predict(dgp: DgpId, target: Target, t: Option<u8>, w: &[f64]) -> Result<f64> {
    if w.len() != dgp.dim() {
        return Err(Error::UnknownOracle(format!(
            "{dgp:?} expects {} covariates, got {}",
            dgp.dim(),
            w.len()
        )));
    }
    let need_t = || {
        t.ok_or_else(|| Error::UnknownOracle(format!("{target:?} requires a treatment value")))
    };
    Ok(match target {
        Target::MuY => sim::mu_y(dgp, need_t()?, w),
        Target::MuC => sim::mu_c(dgp, need_t()?, w),
        Target::MuT => sim::mu_t(dgp, w),
        Target::DeltaY => sim::delta_y(dgp, w),
        Target::DeltaC => sim::delta_c(dgp, w),
    })
}

/// Solve `A x = b` for symmetric positive semi-definite `A`, adding ridge
/// jitter when the Cholesky factorization fails.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    let p = a.nrows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(1.0, f64::max);
    let jittered = a.clone() + DMatrix::identity(p, p) * (RIDGE_JITTER * scale);
    if let Some(ch) = jittered.cholesky() {
        return Some(ch.solve(b));
    }
    a.lu().solve(b)
}

/// Fit a learner to predictor rows `x` and response `y`.
pub fn fit(spec: &LearnerSpec, x: &[Vec<f64>], y: &[f64]) -> Result<FittedRegression> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} predictor rows but {} responses",
            x.len(),
            y.len()
        )));
    }
    let d = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged predictor matrix".into()));
    }
    match spec.kind {
        LearnerKind::Oracle { dgp, target } => {
            let probe_t = target.takes_treatment().then_some(0);
            oracle_predict(dgp, target, probe_t, &vec![0.0; dgp.dim()])?;
            let expected = dgp.dim() + usize::from(target.takes_treatment());
            if !x.is_empty() && d != expected {
                return Err(Error::Dimension(format!(
                    "oracle {dgp:?}/{target:?} expects {expected} predictors, got {d}"
                )));
            }
            Ok(FittedRegression {
                model: Model::Oracle { dgp, target },
                basis: spec.basis,
                diagnostics: FitDiagnostics {
                    converged: true,
                    ..Default::default()
                },
            })
        }
        LearnerKind::Linear => {
            check_rows(spec, x.len(), d)?;
            let beta = fit_linear(spec.basis, x, y)?;
            Ok(FittedRegression {
                model: Model::Linear(beta),
                basis: spec.basis,
                diagnostics: FitDiagnostics {
                    iterations: 1,
                    converged: true,
                    capped: false,
                },
            })
        }
        LearnerKind::Logistic => {
            check_rows(spec, x.len(), d)?;
            if let Some(row) = y.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data {
                    row,
                    msg: format!("logistic response {} outside [0, 1]", y[row]),
                });
            }
            let (beta, diagnostics) = fit_logistic(spec, x, y)?;
            Ok(FittedRegression {
                model: Model::Logistic(beta),
                basis: spec.basis,
                diagnostics,
            })
        }
    }
}

fn check_rows(spec: &LearnerSpec, n: usize, d: usize) -> Result<()> {
    let needed = spec.min_rows(d);
    if n < needed {
        return Err(Error::TooFewObservations { needed, got: n });
    }
    Ok(())
}

/// Weighted Gram matrix `X' W X` and vector `X' W z` in one pass.
fn weighted_normal_equations(
    basis: Basis,
    x: &[Vec<f64>],
    weights: impl Fn(usize) -> f64,
    z: impl Fn(usize) -> f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let p = basis.width(d);
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = Vec::with_capacity(p);
    for (i, xi) in x.iter().enumerate() {
        basis.expand_into(xi, &mut row);
        let wi = weights(i);
        let zi = z(i);
        for a in 0..p {
            let ra = wi * row[a];
            rhs[a] += ra * zi;
            for b in 0..=a {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    (gram, rhs)
}

fn fit_linear(basis: Basis, x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let (gram, rhs) = weighted_normal_equations(basis, x, |_| 1.0, |i| y[i]);
    let beta = solve_spd(gram, &rhs)
        .ok_or_else(|| Error::Dimension("singular least-squares system".into()))?;
    Ok(beta.iter().copied().collect())
}

fn fit_logistic(spec: &LearnerSpec, x: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, FitDiagnostics)> {
    let d = x.first().map_or(0, Vec::len);
    let p = spec.basis.width(d);
    let mut beta = vec![0.0; p];
    let mut diag = FitDiagnostics::default();
    let mut probs = vec![0.0; x.len()];
    for iter in 1..=spec.max_iter {
        for (pi, xi) in probs.iter_mut().zip(x) {
            *pi = expit(dot_basis(spec.basis, &beta, xi));
        }
        // Newton step: (X' W X) step = X' (y - p), with W = p (1 - p).
        let (gram, score) = weighted_normal_equations(
            spec.basis,
            x,
            |i| (probs[i] * (1.0 - probs[i])).max(1e-12),
            |i| (y[i] - probs[i]) / (probs[i] * (1.0 - probs[i])).max(1e-12),
        );
        let step = solve_spd(gram, &score)
            .ok_or_else(|| Error::Dimension("singular IRLS system".into()))?;
        let mut max_change: f64 = 0.0;
        for (b, s) in beta.iter_mut().zip(step.iter()) {
            *b += s;
            max_change = max_change.max(s.abs());
        }
        diag.iterations = iter;
        if beta.iter().any(|b| b.abs() > LOGIT_COEF_CAP) {
            for b in &mut beta {
                *b = b.clamp(-LOGIT_COEF_CAP, LOGIT_COEF_CAP);
            }
            diag.capped = true;
            break;
        }
        if max_change < spec.tol {
            diag.converged = true;
            break;
        }
    }
    Ok((beta, diag))
}
