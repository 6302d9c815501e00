//! Outcome-regression targeting, the plug-in ATE, influence-function
//! evaluation and Wald inference.

use alloc::vec::Vec;

use serde::{Serialize, Serializer};

use crate::data::{Dataset, ProblemConfig, ReferenceKind};
use crate::error::{Error, Result};
use crate::math::{mean, sample_sd, Z_975};
use crate::nuisance::NuisanceValues;
use crate::reference::{Fluctuation, FluctuationFit, ReferenceFit};

/// Targeted outcome regression evaluated at both arms for every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetedOutcome {
    pub mu_y0: Vec<f64>,
    pub mu_y1: Vec<f64>,
    pub fit: FluctuationFit,
}

impl TargetedOutcome {
    #[inline]
    pub fn at(&self, i: usize, t: u8) -> f64 {
        if t == 1 {
            self.mu_y1[i]
        } else {
            self.mu_y0[i]
        }
    }

    #[inline]
    pub fn delta(&self, i: usize) -> f64 {
        self.mu_y1[i] - self.mu_y0[i]
    }
}

/// Fluctuate the outcome regression along
/// `(rho(V) - rho_ref) / (T + mu^T(W) - 1)`.
pub fn target_outcome_regression(
    ds: &Dataset,
    nv: &NuisanceValues,
    rho: &[f64],
    rho_ref: &[f64],
    cfg: &ProblemConfig,
) -> Result<TargetedOutcome> {
    let n = ds.n();
    let fl = Fluctuation::from_bounds(cfg.y_bounds);
    let mut offset = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for (i, o) in ds.observations().iter().enumerate() {
        offset.push(nv.mu_y_at(i, o.t));
        h.push((rho[i] - rho_ref[i]) * nv.inverse_weight(i, o.t));
        z.push(o.y);
    }
    let fit = fl.solve(&offset, &h, &z)?;
    let e = fit.epsilon;
    let mu_y1 = (0..n)
        .map(|i| fl.apply(nv.mu_y1[i], e, (rho[i] - rho_ref[i]) / nv.mu_t[i]))
        .collect();
    let mu_y0 = (0..n)
        .map(|i| fl.apply(nv.mu_y0[i], e, -(rho[i] - rho_ref[i]) / (1.0 - nv.mu_t[i])))
        .collect();
    Ok(TargetedOutcome { mu_y0, mu_y1, fit })
}

/// `(1/n) sum (rho_i - rho_ref_i) Delta^Y(W_i)` with the targeted contrast.
pub fn estimate_ate(rho: &[f64], rho_ref: &[f64], delta_y: &[f64]) -> f64 {
    let n = rho.len() as f64;
    rho.iter()
        .zip(rho_ref)
        .zip(delta_y)
        .map(|((r, q), d)| (r - q) * d)
        .sum::<f64>()
        / n
}

/// Everything about one observation that the gradients need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsTerms {
    pub t: u8,
    pub c: f64,
    pub y: f64,
    pub mu_t: f64,
    /// Targeted `mu^Y(t, w)` at the observed arm and `Delta^Y(w)`.
    pub mu_y_t: f64,
    pub delta_y: f64,
    /// Cost regression at the observed arm, at `t = 0`, and `Delta^C(w)`.
    pub mu_c_t: f64,
    pub mu_c0: f64,
    pub delta_c: f64,
}

impl ObsTerms {
    #[inline]
    fn weight(&self) -> f64 {
        1.0 / (f64::from(self.t) + self.mu_t - 1.0)
    }
}

/// Gradient of the value of rule `rho` penalized by the budget constraint
/// at threshold `tau`.
pub fn eval_d(o: &ObsTerms, rho: f64, psi_rho: f64, tau: f64, alpha: f64, kappa: f64) -> f64 {
    let value = rho * ((o.y - o.mu_y_t) * o.weight() + o.delta_y) - psi_rho;
    if tau == 0.0 {
        return value;
    }
    let t0 = 1.0 - f64::from(o.t);
    let cost = rho * ((o.c - o.mu_c_t) * o.weight() + o.delta_c)
        + alpha * (t0 * (o.c - o.mu_c0) / (1.0 - o.mu_t) + o.mu_c0)
        - kappa;
    value - tau * cost
}

/// Gradient of the never-treat cost `E[mu^C(0, W)]`.
pub fn eval_d1(o: &ObsTerms, mean_mu_c0: f64) -> f64 {
    let t0 = 1.0 - f64::from(o.t);
    t0 * (o.c - o.mu_c0) / (1.0 - o.mu_t) + o.mu_c0 - mean_mu_c0
}

/// Gradient of the mean cost contrast `E[Delta^C(W)]`.
pub fn eval_d2(o: &ObsTerms, mean_delta_c: f64) -> f64 {
    (o.c - o.mu_c_t) * o.weight() + o.delta_c - mean_delta_c
}

/// Gradient of the value of the propensity rule.
pub fn eval_g_tp(o: &ObsTerms, psi_tp: f64) -> f64 {
    o.mu_t * o.weight() * (o.y - o.mu_y_t) + f64::from(o.t) * o.delta_y - psi_tp
}

/// Inputs shared by the per-observation gradient evaluations.
pub struct GradientContext<'a> {
    pub ds: &'a Dataset,
    pub nv: &'a NuisanceValues,
    pub outcome: &'a TargetedOutcome,
    pub rho: &'a [f64],
    /// Threshold `tau_n(k_n)` of the estimated rule.
    pub tau: f64,
    pub phi_n: f64,
    pub cfg: &'a ProblemConfig,
}

impl GradientContext<'_> {
    /// Terms for observation `i` with the untargeted cost regression.
    pub fn terms(&self, i: usize) -> ObsTerms {
        let o = self.ds.obs(i);
        ObsTerms {
            t: o.t,
            c: o.c,
            y: o.y,
            mu_t: self.nv.mu_t[i],
            mu_y_t: self.outcome.at(i, o.t),
            delta_y: self.outcome.delta(i),
            mu_c_t: self.nv.mu_c_at(i, o.t),
            mu_c0: self.nv.mu_c0[i],
            delta_c: self.nv.delta_c[i],
        }
    }

    /// `Psi_rho = (1/n) sum rho_i Delta^Y(W_i)`.
    pub fn value(&self, rho: &[f64]) -> f64 {
        let n = rho.len() as f64;
        rho.iter().enumerate().map(|(i, r)| r * self.outcome.delta(i)).sum::<f64>() / n
    }

    /// Estimated influence function `G - G_R` of the ATE against `reference`.
    pub fn eval_d_reference(&self, reference: &ReferenceFit) -> Result<Vec<f64>> {
        let n = self.ds.n();
        let (alpha, kappa) = (self.cfg.alpha, self.cfg.kappa);
        let rho_ref = reference.rule.values(n);
        let psi_rho = self.value(self.rho);
        let psi_ref = self.value(&rho_ref);
        let g = |i: usize, o: &ObsTerms| eval_d(o, self.rho[i], psi_rho, self.tau, alpha, kappa);
        let out = match reference.kind {
            ReferenceKind::FR => (0..n)
                .map(|i| {
                    let o = self.terms(i);
                    g(i, &o) - eval_d(&o, rho_ref[i], psi_ref, 0.0, alpha, kappa)
                })
                .collect(),
            ReferenceKind::TP => (0..n)
                .map(|i| {
                    let o = self.terms(i);
                    g(i, &o) - eval_g_tp(&o, psi_ref)
                })
                .collect(),
            ReferenceKind::RD => {
                if kappa.is_infinite() {
                    return Err(Error::UnboundedRandomReference);
                }
                let tc = reference
                    .targeted_cost
                    .as_ref()
                    .expect("random reference carries its targeted cost regression");
                let mean_mu_c0 = mean(&self.nv.mu_c0);
                let budget = kappa - alpha * self.phi_n;
                // The capped rule does not move with the distribution.
                let (c1, c2) = if reference.rd_clamped {
                    (0.0, 0.0)
                } else {
                    (alpha * psi_ref / budget, psi_ref / tc.mean_delta_c)
                };
                (0..n)
                    .map(|i| {
                        let o = self.terms(i);
                        let targeted = ObsTerms {
                            mu_c_t: tc.at(i, o.t),
                            mu_c0: tc.mu_c0[i],
                            delta_c: tc.delta(i),
                            ..o
                        };
                        let mut g_rd = eval_d(&o, rho_ref[i], psi_ref, 0.0, alpha, kappa);
                        if c1 != 0.0 {
                            g_rd -= c1 * eval_d1(&o, mean_mu_c0);
                        }
                        if c2 != 0.0 {
                            g_rd -= c2 * eval_d2(&targeted, tc.mean_delta_c);
                        }
                        g(i, &o) - g_rd
                    })
                    .collect()
            }
        };
        Ok(out)
    }

    /// `(1/n) sum {rho_i [Delta^C_i + (C_i - mu^C(T_i, W_i)) / (T_i + mu^T_i - 1)]
    /// + alpha [mu^C(0, W_i) + (1 - T_i)(C_i - mu^C(0, W_i)) / (1 - mu^T_i)]} - kappa`.
    pub fn budget_residual(&self) -> f64 {
        let n = self.ds.n();
        let s: f64 = (0..n)
            .map(|i| {
                let o = self.terms(i);
                let t0 = 1.0 - f64::from(o.t);
                self.rho[i] * ((o.c - o.mu_c_t) * o.weight() + o.delta_c)
                    + self.cfg.alpha * (o.mu_c0 + t0 * (o.c - o.mu_c0) / (1.0 - o.mu_t))
            })
            .sum();
        s / n as f64 - self.cfg.kappa
    }
}

fn ser_pair<S: Serializer>(p: &(f64, f64), s: S) -> core::result::Result<S::Ok, S::Error> {
    [p.0, p.1].serialize(s)
}

/// Estimated ATE of the optimal rule against one reference with its Wald
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteEstimate {
    pub reference: ReferenceKind,
    pub psi: f64,
    pub sigma: f64,
    pub n: usize,
    #[serde(serialize_with = "ser_pair")]
    pub ci95: (f64, f64),
    pub lower975: f64,
    #[serde(skip)]
    pub if_values: Vec<f64>,
}

/// Sample standard deviation of the influence values, the two-sided 95%
/// interval, and the one-sided 97.5% lower bound.
pub fn infer(reference: ReferenceKind, if_values: Vec<f64>, psi: f64) -> Result<AteEstimate> {
    let n = if_values.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let sigma = sample_sd(&if_values);
    let half = Z_975 * sigma / libm::sqrt(n as f64);
    Ok(AteEstimate {
        reference,
        psi,
        sigma,
        n,
        ci95: (psi - half, psi + half),
        lower975: psi - half,
        if_values,
    })
}
