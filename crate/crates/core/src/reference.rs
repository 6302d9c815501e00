//! Reference rules and the targeted cost regression used by the random
//! reference, plus the one-parameter fluctuation shared with the outcome
//! targeting step.

use alloc::format;
use alloc::vec::Vec;

use serde::Serialize;

use crate::data::{Dataset, ProblemConfig, ReferenceKind};
use crate::error::{Error, Result};
use crate::knapsack::TreatmentRule;
use crate::math::{expit, logit, mean};
use crate::nuisance::NuisanceValues;

/// Rescaled predictions are kept this far inside `(0, 1)` before taking logits.
const LOGIT_CLIP: f64 = 1e-9;
const MAX_NEWTON: usize = 200;

/// A no-intercept fluctuation `m -> m + eps * h`, either additive or on the
/// logit scale of a bounded response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fluctuation {
    Linear,
    Logistic { lo: f64, hi: f64 },
}

impl Fluctuation {
    pub fn from_bounds(bounds: Option<(f64, f64)>) -> Self {
        match bounds {
            Some((lo, hi)) => Fluctuation::Logistic { lo, hi },
            None => Fluctuation::Linear,
        }
    }

    /// Fluctuated prediction for offset `m` and covariate value `h`.
    #[inline]
    pub fn apply(&self, m: f64, eps: f64, h: f64) -> f64 {
        match *self {
            Fluctuation::Linear => m + eps * h,
            Fluctuation::Logistic { lo, hi } => {
                let q = ((m - lo) / (hi - lo)).clamp(LOGIT_CLIP, 1.0 - LOGIT_CLIP);
                lo + (hi - lo) * expit(logit(q) + eps * h)
            }
        }
    }

    /// Solve `sum_i h_i (z_i - apply(m_i, eps, h_i)) = 0` for `eps`.
    pub fn solve(&self, offset: &[f64], h: &[f64], z: &[f64]) -> Result<FluctuationFit> {
        let hh: f64 = h.iter().map(|x| x * x).sum();
        if hh == 0.0 {
            return Ok(FluctuationFit {
                epsilon: 0.0,
                score: self.score(offset, h, z, 0.0),
            });
        }
        let eps = match *self {
            Fluctuation::Linear => {
                let hr: f64 = h.iter().zip(offset.iter().zip(z)).map(|(h, (m, z))| h * (z - m)).sum();
                hr / hh
            }
            Fluctuation::Logistic { lo, hi } => {
                if let Some(i) = z.iter().position(|&v| v < lo || v > hi) {
                    return Err(Error::Data {
                        row: i,
                        msg: format!("response {} outside fluctuation bounds [{lo}, {hi}]", z[i]),
                    });
                }
                self.solve_logistic(offset, h, z)
            }
        };
        Ok(FluctuationFit {
            epsilon: eps,
            score: self.score(offset, h, z, eps),
        })
    }

    /// `sum h (z - fitted)`.
    pub fn score(&self, offset: &[f64], h: &[f64], z: &[f64], eps: f64) -> f64 {
        h.iter()
            .zip(offset.iter().zip(z))
            .map(|(h, (m, z))| h * (z - self.apply(*m, eps, *h)))
            .sum()
    }

    /// `(score, d score / d eps)`; the score is non-increasing in `eps`.
    fn score_and_slope(&self, offset: &[f64], h: &[f64], z: &[f64], eps: f64) -> (f64, f64) {
        let (lo, hi) = match *self {
            Fluctuation::Logistic { lo, hi } => (lo, hi),
            Fluctuation::Linear => unreachable!(),
        };
        let mut s = 0.0;
        let mut ds = 0.0;
        for ((&m, &h), &z) in offset.iter().zip(h).zip(z) {
            let q = ((m - lo) / (hi - lo)).clamp(LOGIT_CLIP, 1.0 - LOGIT_CLIP);
            let p = expit(logit(q) + eps * h);
            s += h * (z - lo - (hi - lo) * p);
            ds -= h * h * (hi - lo) * p * (1.0 - p);
        }
        (s, ds)
    }

    /// Newton's method safeguarded by bisection on an expanding bracket.
    fn solve_logistic(&self, offset: &[f64], h: &[f64], z: &[f64]) -> f64 {
        let (s0, _) = self.score_and_slope(offset, h, z, 0.0);
        if s0 == 0.0 {
            return 0.0;
        }
        // Bracket [a, b] with score(a) > 0 > score(b).
        let dir = if s0 > 0.0 { 1.0 } else { -1.0 };
        let mut step = 1.0;
        let mut near = 0.0;
        let mut far = dir * step;
        let mut found = false;
        for _ in 0..64 {
            let (s, _) = self.score_and_slope(offset, h, z, far);
            if s == 0.0 {
                return far;
            }
            if (s > 0.0) != (s0 > 0.0) {
                found = true;
                break;
            }
            near = far;
            step *= 2.0;
            far = dir * step;
        }
        if !found {
            // The score never changes sign: the responses sit on a bound.
            return far;
        }
        let (mut a, mut b) = if dir > 0.0 { (near, far) } else { (far, near) };
        let mut x = 0.5 * (a + b);
        for _ in 0..MAX_NEWTON {
            let (s, ds) = self.score_and_slope(offset, h, z, x);
            if s == 0.0 {
                return x;
            }
            if s > 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = if ds < 0.0 { x - s / ds } else { f64::NAN };
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || b - a <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationFit {
    pub epsilon: f64,
    /// Score `sum h (z - fitted)` at the solution.
    pub score: f64,
}

/// Cost regression fluctuated along `1 / (t + mu^T(w) - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetedCost {
    #[serde(skip)]
    pub mu_c0: Vec<f64>,
    #[serde(skip)]
    pub mu_c1: Vec<f64>,
    pub fit: FluctuationFit,
    /// Mean of the targeted contrast `mu^C(1, W) - mu^C(0, W)`.
    pub mean_delta_c: f64,
}

impl TargetedCost {
    pub fn at(&self, i: usize, t: u8) -> f64 {
        if t == 1 {
            self.mu_c1[i]
        } else {
            self.mu_c0[i]
        }
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.mu_c1[i] - self.mu_c0[i]
    }
}

/// Fluctuate the cost regression so that its residuals are orthogonal to
/// the inverse-propensity covariate. Both arms move together.
pub fn target_cost_regression(ds: &Dataset, nv: &NuisanceValues, cfg: &ProblemConfig) -> Result<TargetedCost> {
    let n = ds.n();
    let fl = Fluctuation::from_bounds(cfg.c_bounds);
    let mut offset = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for (i, o) in ds.observations().iter().enumerate() {
        offset.push(nv.mu_c_at(i, o.t));
        h.push(nv.inverse_weight(i, o.t));
        z.push(o.c);
    }
    let fit = fl.solve(&offset, &h, &z)?;
    let e = fit.epsilon;
    let mu_c1: Vec<f64> = (0..n).map(|i| fl.apply(nv.mu_c1[i], e, 1.0 / nv.mu_t[i])).collect();
    let mu_c0: Vec<f64> = (0..n).map(|i| fl.apply(nv.mu_c0[i], e, -1.0 / (1.0 - nv.mu_t[i]))).collect();
    let mean_delta_c = mu_c1.iter().zip(&mu_c0).map(|(a, b)| a - b).sum::<f64>() / n as f64;
    Ok(TargetedCost {
        mu_c0,
        mu_c1,
        fit,
        mean_delta_c,
    })
}

/// A fitted reference rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceFit {
    pub kind: ReferenceKind,
    #[serde(skip)]
    pub rule: TreatmentRule,
    /// Targeted cost regression, only for the random reference.
    pub targeted_cost: Option<TargetedCost>,
    /// Treatment probability of the random reference.
    pub rd_value: Option<f64>,
    /// The random reference was capped at one.
    pub rd_clamped: bool,
}

/// `min(1, budget / mean_delta_c)`; one when the budget is unbounded.
pub fn rd_value(kappa: f64, alpha: f64, phi_n: f64, mean_delta_c: f64) -> Result<(f64, bool)> {
    if mean_delta_c.is_nan() || mean_delta_c <= 0.0 {
        return Err(Error::NonPositiveCostContrast(mean_delta_c));
    }
    if kappa.is_infinite() {
        return Ok((1.0, true));
    }
    let b = kappa - alpha * phi_n;
    if b < 0.0 {
        return Err(Error::InfeasibleBudget {
            alpha_phi: alpha * phi_n,
            kappa,
        });
    }
    let r = b / mean_delta_c;
    Ok(if r >= 1.0 { (1.0, true) } else { (r, false) })
}

pub fn fit_reference(
    kind: ReferenceKind,
    ds: &Dataset,
    nv: &NuisanceValues,
    phi_n: f64,
    cfg: &ProblemConfig,
) -> Result<ReferenceFit> {
    let base = |rule| ReferenceFit {
        kind,
        rule,
        targeted_cost: None,
        rd_value: None,
        rd_clamped: false,
    };
    Ok(match kind {
        ReferenceKind::FR => base(TreatmentRule::Constant { p: cfg.fr_constant }),
        ReferenceKind::TP => base(TreatmentRule::Propensity { mu_t: nv.mu_t.clone() }),
        ReferenceKind::RD => {
            let tc = target_cost_regression(ds, nv, cfg)?;
            let (p, clamped) = rd_value(cfg.kappa, cfg.alpha, phi_n, tc.mean_delta_c)?;
            ReferenceFit {
                kind,
                rule: TreatmentRule::Constant { p },
                targeted_cost: Some(tc),
                rd_value: Some(p),
                rd_clamped: clamped,
            }
        }
    })
}

/// Empirical mean of a reference rule's treatment probability.
pub fn mean_treated(fit: &ReferenceFit, n: usize) -> f64 {
    mean(&fit.rule.values(n))
}
