//! Nuisance regressions: outcome and cost regressions on `(T, W)`, the
//! propensity score, and the `V`-conditional contrasts used to rank
//! subgroups by benefit per unit cost.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ProblemConfig};
use crate::error::{Error, Result};
use crate::learners::{fit, Basis, FittedRegression, LearnerSpec};
use crate::sim::{DgpId, Target};

/// One learner per nuisance target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuisanceSpecs {
    pub mu_y: LearnerSpec,
    pub mu_c: LearnerSpec,
    pub mu_t: LearnerSpec,
    pub delta_y: LearnerSpec,
    pub delta_c: LearnerSpec,
}

impl NuisanceSpecs {
    /// Logistic regressions for `mu^Y`, `mu^C`, `mu^T` and least squares for
    /// the conditional contrasts.
    pub fn logistic(basis: Basis) -> Self {
        Self {
            mu_y: LearnerSpec::logistic(basis),
            mu_c: LearnerSpec::logistic(basis),
            mu_t: LearnerSpec::logistic(basis),
            delta_y: LearnerSpec::linear(basis),
            delta_c: LearnerSpec::linear(basis),
        }
    }

    pub fn oracle(dgp: DgpId) -> Self {
        Self {
            mu_y: LearnerSpec::oracle(dgp, Target::MuY),
            mu_c: LearnerSpec::oracle(dgp, Target::MuC),
            mu_t: LearnerSpec::oracle(dgp, Target::MuT),
            delta_y: LearnerSpec::oracle(dgp, Target::DeltaY),
            delta_c: LearnerSpec::oracle(dgp, Target::DeltaC),
        }
    }
}

fn tw_row(t: u8, w: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(w.len() + 1);
    r.push(f64::from(t));
    r.extend_from_slice(w);
    r
}

/// Regressions needed to evaluate `xi = delta^Y / delta^C`.
#[derive(Debug, Clone)]
struct RatioModel {
    mu_y: FittedRegression,
    mu_c: FittedRegression,
    /// `None` when `V = W`, in which case `delta = Delta`.
    delta_y: Option<FittedRegression>,
    delta_c: Option<FittedRegression>,
    v_index: Vec<usize>,
}

impl RatioModel {
    fn fit(ds: &Dataset, specs: &NuisanceSpecs) -> Result<Self> {
        let rows: Vec<Vec<f64>> = ds.observations().iter().map(|o| tw_row(o.t, &o.w)).collect();
        let y: Vec<f64> = ds.observations().iter().map(|o| o.y).collect();
        let c: Vec<f64> = ds.observations().iter().map(|o| o.c).collect();
        let mu_y = fit(&specs.mu_y, &rows, &y)?;
        let mu_c = fit(&specs.mu_c, &rows, &c)?;
        let (delta_y, delta_c) = if ds.v_is_w() {
            (None, None)
        } else {
            let vrows: Vec<Vec<f64>> = ds.observations().iter().map(|o| ds.v_of(&o.w)).collect();
            let mut dy = Vec::with_capacity(ds.n());
            let mut dc = Vec::with_capacity(ds.n());
            for o in ds.observations() {
                dy.push(mu_y.predict(&tw_row(1, &o.w)) - mu_y.predict(&tw_row(0, &o.w)));
                dc.push(mu_c.predict(&tw_row(1, &o.w)) - mu_c.predict(&tw_row(0, &o.w)));
            }
            (Some(fit(&specs.delta_y, &vrows, &dy)?), Some(fit(&specs.delta_c, &vrows, &dc)?))
        };
        Ok(Self {
            mu_y,
            mu_c,
            delta_y,
            delta_c,
            v_index: ds.v_index().to_vec(),
        })
    }

    /// `(delta^Y(v), delta^C(v))` before flooring.
    fn contrasts(&self, w: &[f64]) -> (f64, f64) {
        match (&self.delta_y, &self.delta_c) {
            (Some(dy), Some(dc)) => {
                let v: Vec<f64> = self.v_index.iter().map(|&j| w[j]).collect();
                (dy.predict(&v), dc.predict(&v))
            }
            _ => (
                self.mu_y.predict(&tw_row(1, w)) - self.mu_y.predict(&tw_row(0, w)),
                self.mu_c.predict(&tw_row(1, w)) - self.mu_c.predict(&tw_row(0, w)),
            ),
        }
    }

    fn min_rows(ds: &Dataset, specs: &NuisanceSpecs) -> usize {
        let d = ds.dim();
        let mut need = specs.mu_y.min_rows(d + 1).max(specs.mu_c.min_rows(d + 1));
        if !ds.v_is_w() {
            let dv = ds.v_index().len();
            need = need.max(specs.delta_y.min_rows(dv)).max(specs.delta_c.min_rows(dv));
        }
        need
    }
}

/// Fitted nuisance functions. Truncation of the propensity and flooring of
/// cost contrasts happen when the bundle is evaluated, never in the fits.
#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    ratio: RatioModel,
    mu_t: FittedRegression,
    eps_t: f64,
    eps_c: f64,
}

impl NuisanceBundle {
    pub fn mu_y(&self, t: u8, w: &[f64]) -> f64 {
        self.ratio.mu_y.predict(&tw_row(t, w))
    }

    pub fn mu_c(&self, t: u8, w: &[f64]) -> f64 {
        self.ratio.mu_c.predict(&tw_row(t, w))
    }

    pub fn mu_t_raw(&self, w: &[f64]) -> f64 {
        self.mu_t.predict(w)
    }

    /// Propensity truncated into `[eps_t, 1 - eps_t]`.
    pub fn mu_t(&self, w: &[f64]) -> f64 {
        self.mu_t_raw(w).clamp(self.eps_t, 1.0 - self.eps_t)
    }

    pub fn delta_y_w(&self, w: &[f64]) -> f64 {
        self.mu_y(1, w) - self.mu_y(0, w)
    }

    /// `Delta^C(w)` floored at `eps_c`.
    pub fn delta_c_w(&self, w: &[f64]) -> f64 {
        (self.mu_c(1, w) - self.mu_c(0, w)).max(self.eps_c)
    }

    /// `(delta^Y(v), delta^C(v))` at the decision covariate of `w`, with
    /// `delta^C` floored at `eps_c`.
    pub fn contrasts(&self, w: &[f64]) -> (f64, f64) {
        let (dy, dc) = self.ratio.contrasts(w);
        (dy, dc.max(self.eps_c))
    }

    pub fn xi(&self, w: &[f64]) -> f64 {
        let (dy, dc) = self.contrasts(w);
        dy / dc
    }

    pub fn evaluate(&self, ds: &Dataset) -> NuisanceValues {
        let n = ds.n();
        let mut mu_y0 = Vec::with_capacity(n);
        let mut mu_y1 = Vec::with_capacity(n);
        let mut mu_c0 = Vec::with_capacity(n);
        let mut mu_c1 = Vec::with_capacity(n);
        let mut mu_t = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        let mut dc = Vec::with_capacity(n);
        for o in ds.observations() {
            mu_y0.push(self.mu_y(0, &o.w));
            mu_y1.push(self.mu_y(1, &o.w));
            mu_c0.push(self.mu_c(0, &o.w));
            mu_c1.push(self.mu_c(1, &o.w));
            mu_t.push(self.mu_t_raw(&o.w));
            let (a, b) = self.ratio.contrasts(&o.w);
            dy.push(a);
            dc.push(b);
        }
        NuisanceValues::from_raw(mu_y0, mu_y1, mu_c0, mu_c1, mu_t, dy, dc, self.eps_t, self.eps_c)
    }
}

/// Fit every nuisance function on the full sample.
pub fn fit_bundle(ds: &Dataset, specs: &NuisanceSpecs, cfg: &ProblemConfig) -> Result<NuisanceBundle> {
    let ratio = RatioModel::fit(ds, specs)?;
    let wrows: Vec<Vec<f64>> = ds.observations().iter().map(|o| o.w.clone()).collect();
    let t: Vec<f64> = ds.observations().iter().map(|o| o.t_f64()).collect();
    let mu_t = fit(&specs.mu_t, &wrows, &t)?;
    Ok(NuisanceBundle {
        ratio,
        mu_t,
        eps_t: cfg.eps_t,
        eps_c: cfg.eps_c,
    })
}

/// Per-observation nuisance evaluations consumed by the estimation steps.
///
/// `mu_t` is already truncated and `delta_c` already floored.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceValues {
    pub mu_y0: Vec<f64>,
    pub mu_y1: Vec<f64>,
    pub mu_c0: Vec<f64>,
    pub mu_c1: Vec<f64>,
    pub mu_t: Vec<f64>,
    /// `Delta^Y(W_i)`.
    pub delta_y: Vec<f64>,
    /// `Delta^C(W_i)`, floored.
    pub delta_c: Vec<f64>,
    /// Benefit-to-cost ratio `xi(V_i)`.
    pub xi: Vec<f64>,
    pub mu_t_truncated: usize,
    pub delta_c_floored: usize,
    pub delta_c_v_floored: usize,
}

impl NuisanceValues {
    /// Build from raw evaluations, applying truncation and flooring.
    /// `delta_y_v` and `delta_c_v` are the conditional contrasts at `V_i`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        mu_y0: Vec<f64>,
        mu_y1: Vec<f64>,
        mu_c0: Vec<f64>,
        mu_c1: Vec<f64>,
        mu_t_raw: Vec<f64>,
        delta_y_v: Vec<f64>,
        delta_c_v: Vec<f64>,
        eps_t: f64,
        eps_c: f64,
    ) -> Self {
        let mut mu_t_truncated = 0;
        let mu_t = mu_t_raw
            .iter()
            .map(|&p| {
                let q = p.clamp(eps_t, 1.0 - eps_t);
                mu_t_truncated += usize::from(q != p);
                q
            })
            .collect();
        let mut delta_c_floored = 0;
        let delta_c = mu_c0
            .iter()
            .zip(&mu_c1)
            .map(|(c0, c1)| {
                let d = c1 - c0;
                delta_c_floored += usize::from(d < eps_c);
                d.max(eps_c)
            })
            .collect();
        let delta_y = mu_y0.iter().zip(&mu_y1).map(|(a, b)| b - a).collect();
        let (xi, delta_c_v_floored) = ratio(&delta_y_v, &delta_c_v, eps_c);
        Self {
            mu_y0,
            mu_y1,
            mu_c0,
            mu_c1,
            mu_t,
            delta_y,
            delta_c,
            xi,
            mu_t_truncated,
            delta_c_floored,
            delta_c_v_floored,
        }
    }

    pub fn n(&self) -> usize {
        self.mu_t.len()
    }

    /// Replace `xi` by cross-fitted values.
    pub fn with_cross_fit(mut self, cf: CrossFitXi) -> Self {
        self.xi = cf.xi;
        self.delta_c_v_floored = cf.floored;
        self
    }

    #[inline]
    pub fn mu_y_at(&self, i: usize, t: u8) -> f64 {
        if t == 1 {
            self.mu_y1[i]
        } else {
            self.mu_y0[i]
        }
    }

    #[inline]
    pub fn mu_c_at(&self, i: usize, t: u8) -> f64 {
        if t == 1 {
            self.mu_c1[i]
        } else {
            self.mu_c0[i]
        }
    }

    /// Clever covariate `1 / (t + mu^T(W_i) - 1)`.
    #[inline]
    pub fn inverse_weight(&self, i: usize, t: u8) -> f64 {
        1.0 / (f64::from(t) + self.mu_t[i] - 1.0)
    }
}

fn ratio(dy: &[f64], dc: &[f64], eps_c: f64) -> (Vec<f64>, usize) {
    let mut floored = 0;
    let xi = dy
        .iter()
        .zip(dc)
        .map(|(a, b)| {
            floored += usize::from(*b < eps_c);
            a / b.max(eps_c)
        })
        .collect();
    (xi, floored)
}

/// Assignment of observations to cross-fitting folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossFitPlan {
    fold_of: Vec<usize>,
    folds: usize,
}

impl CrossFitPlan {
    /// Seeded random split into `folds` groups whose sizes differ by at most one.
    pub fn new<R: RngCore + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Result<Self> {
        if folds == 0 || folds > n.max(1) {
            return Err(Error::Config(alloc::format!("cannot split {n} rows into {folds} folds")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut fold_of = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
        Ok(Self { fold_of, folds })
    }

    pub fn from_assignment(fold_of: Vec<usize>, folds: usize) -> Result<Self> {
        if folds == 0 || fold_of.iter().any(|&f| f >= folds) {
            return Err(Error::Config("fold index out of range".into()));
        }
        Ok(Self { fold_of, folds })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Cross-fitted benefit-to-cost ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitXi {
    pub xi: Vec<f64>,
    /// Observations whose out-of-fold `delta^C` was floored.
    pub floored: usize,
}

/// Out-of-fold `xi`: observation `i` uses contrasts fit on every fold but
/// its own. A single fold falls back to the full-sample fit.
pub fn cross_fit_xi(
    ds: &Dataset,
    specs: &NuisanceSpecs,
    cfg: &ProblemConfig,
    plan: &CrossFitPlan,
) -> Result<CrossFitXi> {
    let n = ds.n();
    let mut dy = vec![0.0; n];
    let mut dc = vec![0.0; n];
    if plan.folds() == 1 {
        let model = RatioModel::fit(ds, specs)?;
        for (i, o) in ds.observations().iter().enumerate() {
            (dy[i], dc[i]) = model.contrasts(&o.w);
        }
    } else {
        let needed = RatioModel::min_rows(ds, specs).max(1);
        for fold in 0..plan.folds() {
            let train = plan.complement(fold);
            if train.len() < needed {
                return Err(Error::FoldTooSmall {
                    fold,
                    train: train.len(),
                    needed,
                });
            }
            let model = RatioModel::fit(&ds.subset(&train)?, specs)?;
            for i in plan.members(fold) {
                (dy[i], dc[i]) = model.contrasts(&ds.obs(i).w);
            }
        }
    }
    let (xi, floored) = ratio(&dy, &dc, cfg.eps_c);
    Ok(CrossFitXi { xi, floored })
}
