//! The empirical fractional knapsack: one-step estimate of the never-treat
//! cost, thresholds on the benefit-to-cost ratio, budget calibration, and
//! the estimated optimal rule with boundary randomization.
//!
//! Items are observations ranked by `xi`. Their cost is the floored
//! contrast `Delta^C(W_i) / n`, and the available budget at level `k` is
//! `k - alpha * phi_n`. Ties in `xi` are exact floating-point equality:
//! thresholds are always set to an observed `xi`, so ties arise by
//! construction.

use alloc::vec::Vec;

use serde::Serialize;

use crate::data::{Dataset, ProblemConfig};
use crate::error::{Error, Result};
use crate::nuisance::NuisanceValues;

/// A stochastic treatment rule evaluated at the observations of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreatmentRule {
    /// `1` above `eta`, `boundary_prob` at `eta`, `0` below.
    Threshold {
        xi: Vec<f64>,
        eta: f64,
        boundary_prob: f64,
    },
    Constant { p: f64 },
    /// Treat with the (truncated) propensity of each observation.
    Propensity { mu_t: Vec<f64> },
}

impl TreatmentRule {
    /// Treatment probability for observation `i`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        match self {
            TreatmentRule::Threshold {
                xi,
                eta,
                boundary_prob,
            } => {
                let x = xi[i];
                if x > *eta {
                    1.0
                } else if x == *eta {
                    *boundary_prob
                } else {
                    0.0
                }
            }
            TreatmentRule::Constant { p } => *p,
            TreatmentRule::Propensity { mu_t } => mu_t[i],
        }
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.value(i)).collect()
    }
}

/// One-step estimate of the never-treat cost `E[mu^C(0, W)]`.
pub fn phi_one_step(ds: &Dataset, nv: &NuisanceValues) -> f64 {
    let n = ds.n() as f64;
    ds.observations()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let m0 = nv.mu_c0[i];
            m0 + (1.0 - o.t_f64()) * (o.c - m0) / (1.0 - nv.mu_t[i])
        })
        .sum::<f64>()
        / n
}

/// `(Gamma_n(tau), gamma_n(tau))`: average cost over strict exceedances of
/// `tau` and over exact ties with `tau`.
pub fn empirical_gamma(xi: &[f64], delta_c: &[f64], tau: f64) -> (f64, f64) {
    let n = xi.len() as f64;
    let mut above = 0.0;
    let mut tie = 0.0;
    for (&x, &d) in xi.iter().zip(delta_c) {
        if x > tau {
            above += d;
        } else if x == tau {
            tie += d;
        }
    }
    (above / n, tie / n)
}

/// Distinct `xi` levels in decreasing order with per-level cost sums.
#[derive(Debug, Clone)]
struct Ladder {
    levels: Vec<f64>,
    /// `gamma_n` at each level.
    cost: Vec<f64>,
    /// `Gamma_n` at each level, i.e. cost strictly above it.
    cost_above: Vec<f64>,
    /// Per-level sums of an auxiliary per-observation quantity, divided by n.
    aux: Vec<f64>,
    aux_above: Vec<f64>,
    total_cost: f64,
}

impl Ladder {
    fn new(xi: &[f64], delta_c: &[f64], aux: Option<&[f64]>) -> Self {
        let n = xi.len() as f64;
        let mut order: Vec<usize> = (0..xi.len()).collect();
        order.sort_by(|&a, &b| xi[b].total_cmp(&xi[a]));
        let mut levels = Vec::new();
        let mut cost: Vec<f64> = Vec::new();
        let mut auxs: Vec<f64> = Vec::new();
        for &i in &order {
            let a = aux.map_or(0.0, |v| v[i]);
            if levels.last() == Some(&xi[i]) {
                *cost.last_mut().unwrap() += delta_c[i];
                *auxs.last_mut().unwrap() += a;
            } else {
                levels.push(xi[i]);
                cost.push(delta_c[i]);
                auxs.push(a);
            }
        }
        for c in &mut cost {
            *c /= n;
        }
        for a in &mut auxs {
            *a /= n;
        }
        let prefix = |v: &[f64]| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(v.len());
            for x in v {
                out.push(acc);
                acc += x;
            }
            (out, acc)
        };
        let (cost_above, total_cost) = prefix(&cost);
        let (aux_above, _) = prefix(&auxs);
        Self {
            levels,
            cost,
            cost_above,
            aux: auxs,
            aux_above,
            total_cost,
        }
    }

    /// Level index of `eta_n` for available budget `b >= 0`, or `None` when
    /// treating everyone fits (`eta_n = -inf`).
    fn eta_index(&self, b: f64) -> Option<usize> {
        if self.total_cost <= b {
            return None;
        }
        // Largest j with Gamma(level_j) <= b; cost_above[0] = 0 <= b.
        Some(self.cost_above.partition_point(|&g| g <= b) - 1)
    }
}

/// `eta_n(k)`, `tau_n(k)` and the rule `d_{n,k}` that thresholds at
/// `eta_n(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRule {
    pub eta: f64,
    pub tau: f64,
    pub rule: TreatmentRule,
}

/// Solve the empirical knapsack at budget level `k` (may be infinite).
pub fn solve_rule_at_budget(
    xi: &[f64],
    delta_c: &[f64],
    k: f64,
    alpha: f64,
    phi_n: f64,
) -> Result<BudgetRule> {
    let ladder = Ladder::new(xi, delta_c, None);
    solve_on_ladder(&ladder, xi, k, alpha, phi_n)
}

fn available(k: f64, alpha: f64, phi_n: f64) -> Result<f64> {
    let b = k - alpha * phi_n;
    if b < 0.0 || b.is_nan() {
        return Err(Error::InfeasibleBudget {
            alpha_phi: alpha * phi_n,
            kappa: k,
        });
    }
    Ok(b)
}

fn solve_on_ladder(ladder: &Ladder, xi: &[f64], k: f64, alpha: f64, phi_n: f64) -> Result<BudgetRule> {
    let b = available(k, alpha, phi_n)?;
    let (eta, boundary_prob) = match ladder.eta_index(b) {
        None => (f64::NEG_INFINITY, 0.0),
        Some(j) => {
            let g = ladder.cost[j];
            let p = if g > 0.0 {
                (b - ladder.cost_above[j]) / g
            } else {
                0.0
            };
            (ladder.levels[j], p)
        }
    };
    Ok(BudgetRule {
        eta,
        tau: eta.max(0.0),
        rule: TreatmentRule::Threshold {
            xi: xi.to_vec(),
            eta,
            boundary_prob,
        },
    })
}

/// Outcome of the budget calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub k_n: f64,
    /// Whether a root of the calibration equation was used.
    pub saturated: bool,
    /// Number of roots found in `[alpha * phi_n, kappa_max]`.
    pub roots: usize,
    /// Plug-in cost of treating everyone, `alpha * phi_n + mean Delta^C`.
    pub kappa_max: f64,
}

/// Per-observation cost influence `Delta^C(W_i) + (C_i - mu^C(T_i, W_i)) / (T_i + mu^T(W_i) - 1)`.
pub fn cost_influence(ds: &Dataset, nv: &NuisanceValues) -> Vec<f64> {
    ds.observations()
        .iter()
        .enumerate()
        .map(|(i, o)| nv.delta_c[i] + (o.c - nv.mu_c_at(i, o.t)) * nv.inverse_weight(i, o.t))
        .collect()
}

/// Left-hand side of the calibration equation at budget `k`, evaluated
/// directly from `d_{n,k}`.
pub fn calibration_lhs(
    xi: &[f64],
    delta_c: &[f64],
    influence: &[f64],
    k: f64,
    alpha: f64,
    phi_n: f64,
) -> Result<f64> {
    let d = solve_rule_at_budget(xi, delta_c, k, alpha, phi_n)?;
    let n = xi.len() as f64;
    let s: f64 = influence.iter().enumerate().map(|(i, a)| d.rule.value(i) * a).sum();
    Ok(s / n + alpha * phi_n)
}

/// Calibrate the budget so that the estimated rule's one-step cost equals
/// `kappa`.
///
/// The left-hand side is continuous and piecewise affine in `k`, with
/// breakpoints at the cumulative cost levels, so every segment is solved in
/// closed form. Among several roots the one closest to `kappa` wins. When
/// `tau_n(kappa) <= 0` or no root exists, `k_n = kappa`.
pub fn calibrate_budget(ds: &Dataset, nv: &NuisanceValues, cfg: &ProblemConfig, phi_n: f64) -> Result<Calibration> {
    let influence = cost_influence(ds, nv);
    let ladder = Ladder::new(&nv.xi, &nv.delta_c, Some(&influence));
    let ap = cfg.alpha * phi_n;
    let kappa = cfg.kappa;
    let kappa_max = ap + ladder.total_cost;
    let fallback = Calibration {
        k_n: kappa,
        saturated: false,
        roots: 0,
        kappa_max,
    };
    if kappa.is_infinite() {
        return Ok(fallback);
    }
    let b_kappa = available(kappa, cfg.alpha, phi_n)?;
    let tau_kappa = match ladder.eta_index(b_kappa) {
        Some(j) => ladder.levels[j].max(0.0),
        None => 0.0,
    };
    if tau_kappa <= 0.0 {
        return Ok(fallback);
    }
    let target = kappa - ap;
    let tol = 1e-12 * (1.0 + ladder.total_cost);
    let mut best: Option<f64> = None;
    let mut roots = 0;
    let mut consider = |k: f64, roots: &mut usize| {
        *roots += 1;
        if best.is_none_or(|b| (k - kappa).abs() < (b - kappa).abs()) {
            best = Some(k);
        }
    };
    for j in 0..ladder.levels.len() {
        let lo = ladder.cost_above[j];
        let width = ladder.cost[j];
        let hi = lo + width;
        let base = ladder.aux_above[j];
        if width <= 0.0 {
            continue;
        }
        let slope = ladder.aux[j] / width;
        if slope != 0.0 {
            let b = lo + (target - base) / slope;
            if b >= lo - tol && b <= hi + tol {
                consider(b.clamp(lo, hi) + ap, &mut roots);
            }
        } else if (base - target).abs() <= tol {
            consider(target.clamp(lo, hi) + ap, &mut roots);
        }
    }
    Ok(match best {
        Some(k_n) => Calibration {
            k_n,
            saturated: true,
            roots,
            kappa_max,
        },
        None => fallback,
    })
}

/// The estimated optimal rule at calibrated budget `k_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoFit {
    pub rule: TreatmentRule,
    /// `tau_n(k_n) = max(eta_n(k_n), 0)`.
    pub tau: f64,
    pub eta: f64,
    /// The boundary probability fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
}

/// Threshold at `tau_n(k_n)`, randomizing on ties so the budget is used.
pub fn build_rho(xi: &[f64], delta_c: &[f64], k_n: f64, alpha: f64, phi_n: f64) -> Result<RhoFit> {
    let ladder = Ladder::new(xi, delta_c, None);
    build_rho_on_ladder(&ladder, xi, delta_c, k_n, alpha, phi_n)
}

fn build_rho_on_ladder(
    ladder: &Ladder,
    xi: &[f64],
    delta_c: &[f64],
    k_n: f64,
    alpha: f64,
    phi_n: f64,
) -> Result<RhoFit> {
    let b = available(k_n, alpha, phi_n)?;
    let eta = match ladder.eta_index(b) {
        Some(j) => ladder.levels[j],
        None => f64::NEG_INFINITY,
    };
    let tau = eta.max(0.0);
    let (above, tie) = empirical_gamma(xi, delta_c, tau);
    let mut clamped = false;
    let boundary_prob = if tie > 0.0 {
        let p = (b - above) / tie;
        if b.is_infinite() {
            1.0
        } else if !(0.0..=1.0).contains(&p) {
            clamped = true;
            p.clamp(0.0, 1.0)
        } else {
            p
        }
    } else {
        0.0
    };
    Ok(RhoFit {
        rule: TreatmentRule::Threshold {
            xi: xi.to_vec(),
            eta: tau,
            boundary_prob,
        },
        tau,
        eta,
        clamped,
    })
}

/// Everything the knapsack step produces.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackFit {
    pub phi_n: f64,
    pub eta_kappa: f64,
    pub tau_kappa: f64,
    pub calibration: Calibration,
    pub k_n: f64,
    /// Boundary case: a calibration root was used and `tau_n(k_n) > 0`, so
    /// `rule` spends the whole budget. A root with `eta_n(k_n) < 0` gives
    /// `rule = I(xi > 0)`, which leaves budget unused.
    pub saturated: bool,
    /// `tau_n(k_n)`, the threshold used by `rule`.
    pub tau_n: f64,
    pub rule: TreatmentRule,
    pub boundary_clamped: bool,
}

pub fn fit_knapsack(ds: &Dataset, nv: &NuisanceValues, cfg: &ProblemConfig) -> Result<KnapsackFit> {
    let phi_n = phi_one_step(ds, nv);
    let ladder = Ladder::new(&nv.xi, &nv.delta_c, None);
    let at_kappa = solve_on_ladder(&ladder, &nv.xi, cfg.kappa, cfg.alpha, phi_n)?;
    let calibration = calibrate_budget(ds, nv, cfg, phi_n)?;
    let rho = build_rho_on_ladder(&ladder, &nv.xi, &nv.delta_c, calibration.k_n, cfg.alpha, phi_n)?;
    Ok(KnapsackFit {
        phi_n,
        eta_kappa: at_kappa.eta,
        tau_kappa: at_kappa.tau,
        k_n: calibration.k_n,
        saturated: calibration.saturated && rho.tau > 0.0,
        calibration,
        tau_n: rho.tau,
        rule: rho.rule,
        boundary_clamped: rho.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const XI4: [f64; 4] = [2.0, 1.0, 0.5, -1.0];
    const DC4: [f64; 4] = [0.5; 4];

    fn threshold(rule: &TreatmentRule) -> (f64, f64) {
        match rule {
            TreatmentRule::Threshold { eta, boundary_prob, .. } => (*eta, *boundary_prob),
            _ => panic!("not a threshold rule"),
        }
    }

    /// Values for a dataset with given propensity and cost regressions.
    fn nv_with(mu_c0: Vec<f64>, mu_c1: Vec<f64>, mu_t: Vec<f64>, xi: Vec<f64>) -> NuisanceValues {
        let n = mu_t.len();
        let mut nv = NuisanceValues::from_raw(
            vec![0.0; n],
            vec![0.0; n],
            mu_c0,
            mu_c1,
            mu_t,
            vec![0.0; n],
            vec![1.0; n],
            0.01,
            1e-3,
        );
        nv.xi = xi;
        nv
    }

    #[test]
    fn phi_hand_computation() {
        let ds = Dataset::with_full_v(vec![
            Observation::new(vec![0.0], 0, 1.0, 0.0),
            Observation::new(vec![1.0], 1, 1.0, 0.0),
        ])
        .unwrap();
        let nv = nv_with(vec![0.5; 2], vec![1.0; 2], vec![0.5; 2], vec![0.0; 2]);
        assert!((phi_one_step(&ds, &nv) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_zero_correction_cases() {
        // C equals mu^C(0, W) for controls: correction vanishes.
        let ds = Dataset::with_full_v(vec![
            Observation::new(vec![0.0], 0, 0.2, 0.0),
            Observation::new(vec![1.0], 0, 0.4, 0.0),
        ])
        .unwrap();
        let nv = nv_with(vec![0.2, 0.4], vec![1.0; 2], vec![0.3; 2], vec![0.0; 2]);
        assert!((phi_one_step(&ds, &nv) - 0.3).abs() < 1e-15);
        // All treated: (1 - t) kills the correction.
        let ds = Dataset::with_full_v(vec![
            Observation::new(vec![0.0], 1, 5.0, 0.0),
            Observation::new(vec![1.0], 1, 9.0, 0.0),
        ])
        .unwrap();
        let nv = nv_with(vec![0.2, 0.4], vec![1.0; 2], vec![0.99; 2], vec![0.0; 2]);
        assert!((phi_one_step(&ds, &nv) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gamma_hand_counts() {
        assert_eq!(empirical_gamma(&XI4, &DC4, 0.5), (0.25, 0.125));
        assert_eq!(empirical_gamma(&XI4, &DC4, 3.0), (0.0, 0.0));
        assert_eq!(empirical_gamma(&XI4, &DC4, f64::NEG_INFINITY), (0.5, 0.0));
    }

    #[test]
    fn solve_four_items() {
        let r = solve_rule_at_budget(&XI4, &DC4, 0.25, 0.0, 0.0).unwrap();
        assert_eq!((r.eta, r.tau), (0.5, 0.5));
        assert_eq!(threshold(&r.rule), (0.5, 0.0));

        let r = solve_rule_at_budget(&XI4, &DC4, 0.3, 0.0, 0.0).unwrap();
        assert_eq!(r.eta, 0.5);
        let (_, p) = threshold(&r.rule);
        assert!((p - 0.4).abs() < 1e-12);

        let r = solve_rule_at_budget(&XI4, &DC4, f64::INFINITY, 0.0, 0.0).unwrap();
        assert_eq!(r.eta, f64::NEG_INFINITY);
        assert_eq!(r.tau, 0.0);
        assert_eq!(r.rule.values(4), vec![1.0; 4]);

        let e = solve_rule_at_budget(&XI4, &DC4, 0.1, 1.0, 0.2).unwrap_err();
        assert!(matches!(e, Error::InfeasibleBudget { .. }));
    }

    #[test]
    fn d_thresholds_at_eta_even_when_negative() {
        // Budget covers all but the last item: eta is -1, harmful items treated.
        let r = solve_rule_at_budget(&XI4, &DC4, 0.45, 0.0, 0.0).unwrap();
        assert_eq!(r.eta, -1.0);
        assert_eq!(r.tau, 0.0);
        let v = r.rule.values(4);
        assert_eq!(&v[..3], &[1.0, 1.0, 1.0]);
        assert!((v[3] - 0.6).abs() < 1e-12);
        // rho truncates the threshold at zero.
        let rho = build_rho(&XI4, &DC4, 0.45, 0.0, 0.0).unwrap();
        assert_eq!(rho.rule.values(4), vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn build_rho_cases() {
        let r = build_rho(&XI4, &DC4, 0.3, 0.0, 0.0).unwrap();
        let v = r.rule.values(4);
        assert_eq!(&v[..2], &[1.0, 1.0]);
        assert!((v[2] - 0.4).abs() < 1e-12);
        assert_eq!(v[3], 0.0);
        assert!(!r.clamped);

        let neg = [-0.5, -1.0, -2.0];
        let r = build_rho(&neg, &[0.5; 3], 10.0, 0.0, 0.0).unwrap();
        assert_eq!(r.rule.values(3), vec![0.0; 3]);

        let pos = [0.5, 1.0, 2.0];
        let r = build_rho(&pos, &[0.5; 3], 10.0, 0.0, 0.0).unwrap();
        assert_eq!(r.rule.values(3), vec![1.0; 3]);
    }

    #[test]
    fn build_rho_clamps_zero_ties() {
        // Slack budget with ties at zero: the literal formula exceeds one.
        let r = build_rho(&[1.0, 0.0], &[0.5, 0.5], 10.0, 0.0, 0.0).unwrap();
        assert!(r.clamped);
        assert_eq!(r.rule.values(2), vec![1.0, 1.0]);
    }

    fn four_item_problem() -> (Dataset, NuisanceValues) {
        // Residuals C - mu^C(T, W) = [+0.1, -0.1, 0, 0], mu^T = 0.5, Delta^C = 0.5.
        let obs = vec![
            Observation::new(vec![0.0], 1, 0.7, 0.0),
            Observation::new(vec![0.0], 1, 0.5, 0.0),
            Observation::new(vec![0.0], 0, 0.1, 0.0),
            Observation::new(vec![0.0], 0, 0.1, 0.0),
        ];
        let ds = Dataset::with_full_v(obs).unwrap();
        let nv = nv_with(vec![0.1; 4], vec![0.6; 4], vec![0.5; 4], XI4.to_vec());
        (ds, nv)
    }

    /// Root of the calibration equation by a dense grid scan over k,
    /// evaluating d_{n,k} directly and interpolating sign changes.
    fn grid_roots(xi: &[f64], dc: &[f64], infl: &[f64], alpha: f64, phi: f64, kappa: f64, kmax: f64) -> Vec<f64> {
        let m = 10_000;
        let lo = alpha * phi;
        let f = |k: f64| calibration_lhs(xi, dc, infl, k, alpha, phi).unwrap() - kappa;
        let mut roots = Vec::new();
        let mut prev_k = lo;
        let mut prev = f(lo);
        for s in 1..=m {
            let k = lo + (kmax - lo) * s as f64 / m as f64;
            let v = f(k);
            if prev == 0.0 {
                roots.push(prev_k);
            } else if prev * v < 0.0 {
                roots.push(prev_k - prev * (k - prev_k) / (v - prev));
            }
            prev_k = k;
            prev = v;
        }
        if prev == 0.0 {
            roots.push(prev_k);
        }
        roots
    }

    #[test]
    fn calibration_matches_grid_oracle() {
        let (ds, nv) = four_item_problem();
        let mut cfg = ProblemConfig::new(0.25, 0.0);
        cfg.folds = 1;
        let cal = calibrate_budget(&ds, &nv, &cfg, 0.0).unwrap();
        assert!(cal.saturated);
        let infl = cost_influence(&ds, &nv);
        assert!((infl[0] - 0.7).abs() < 1e-12 && (infl[1] - 0.3).abs() < 1e-12);
        let roots = grid_roots(&nv.xi, &nv.delta_c, &infl, 0.0, 0.0, 0.25, cal.kappa_max);
        let closest = roots
            .iter()
            .copied()
            .min_by(|a, b| (a - 0.25).abs().total_cmp(&(b - 0.25).abs()))
            .unwrap();
        assert!((cal.k_n - closest).abs() < 1e-4, "{} vs {closest}", cal.k_n);
        let lhs = calibration_lhs(&nv.xi, &nv.delta_c, &infl, cal.k_n, 0.0, 0.0).unwrap();
        assert!((lhs - 0.25).abs() < 1e-12);
    }

    #[test]
    fn calibration_with_displaced_root() {
        // Larger residual on the top item moves the root below kappa.
        let (mut ds_obs, nv) = {
            let (ds, nv) = four_item_problem();
            (ds.observations().to_vec(), nv)
        };
        ds_obs[0].c = 0.9;
        let ds = Dataset::with_full_v(ds_obs).unwrap();
        let cfg = ProblemConfig::new(0.3, 0.0);
        let cal = calibrate_budget(&ds, &nv, &cfg, 0.0).unwrap();
        assert!(cal.saturated);
        let infl = cost_influence(&ds, &nv);
        let roots = grid_roots(&nv.xi, &nv.delta_c, &infl, 0.0, 0.0, 0.3, cal.kappa_max);
        assert!(!roots.is_empty());
        let closest = roots
            .iter()
            .copied()
            .min_by(|a, b| (a - 0.3).abs().total_cmp(&(b - 0.3).abs()))
            .unwrap();
        assert!((cal.k_n - closest).abs() < 1e-4, "{} vs {closest}", cal.k_n);
        assert!(cal.k_n < 0.3);
    }

    #[test]
    fn zero_residuals_give_kappa() {
        let obs: Vec<Observation> = (0..4).map(|i| Observation::new(vec![0.0], (i % 2) as u8, 0.1 + 0.5 * (i % 2) as f64, 0.0)).collect();
        let ds = Dataset::with_full_v(obs).unwrap();
        let nv = nv_with(vec![0.1; 4], vec![0.6; 4], vec![0.5; 4], XI4.to_vec());
        let cfg = ProblemConfig::new(0.3, 0.0);
        let cal = calibrate_budget(&ds, &nv, &cfg, 0.0).unwrap();
        assert!(cal.saturated);
        assert!((cal.k_n - 0.3).abs() < 1e-12);

        // Slack budget: tau_n(kappa) = 0.
        let cfg = ProblemConfig::new(0.45, 0.0);
        let cal = calibrate_budget(&ds, &nv, &cfg, 0.0).unwrap();
        assert!(!cal.saturated);
        assert_eq!(cal.k_n, 0.45);

        let cfg = ProblemConfig::new(f64::INFINITY, 0.0);
        let cal = calibrate_budget(&ds, &nv, &cfg, 0.0).unwrap();
        assert!(!cal.saturated && cal.k_n.is_infinite());
    }

    /// Fractional knapsack LP optimum by the classic greedy: take items in
    /// decreasing value density while density is positive, splitting the
    /// marginal item.
    fn greedy_lp(xi: &[f64], dc: &[f64], budget: f64) -> f64 {
        let n = xi.len() as f64;
        let mut order: Vec<usize> = (0..xi.len()).collect();
        order.sort_by(|&a, &b| xi[b].partial_cmp(&xi[a]).unwrap());
        let mut cap = budget * n;
        let mut value = 0.0;
        for i in order {
            if xi[i] <= 0.0 || cap <= 0.0 {
                break;
            }
            let take = (cap / dc[i]).min(1.0);
            value += take * xi[i] * dc[i];
            cap -= take * dc[i];
        }
        value / n
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                prop::collection::vec((-4i32..=4).prop_map(|k| k as f64 * 0.25), n),
                prop::collection::vec(0.01f64..2.0, n),
                0.0f64..3.0,
                0.0f64..=1.0,
                0.0f64..0.5,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rule_matches_greedy_optimum((xi, dc, extra, alpha, phi) in instance()) {
            let k = alpha * phi + extra;
            let rho = build_rho(&xi, &dc, k, alpha, phi).unwrap();
            let n = xi.len() as f64;
            let vals = rho.rule.values(xi.len());
            let obj: f64 = vals.iter().zip(xi.iter().zip(&dc)).map(|(r, (x, d))| r * x * d).sum::<f64>() / n;
            let opt = greedy_lp(&xi, &dc, extra);
            prop_assert!((obj - opt).abs() <= 1e-12, "obj {obj} opt {opt}");
            let cost: f64 = vals.iter().zip(&dc).map(|(r, d)| r * d).sum::<f64>() / n + alpha * phi;
            prop_assert!(cost <= k + 1e-12);
            prop_assert!(rho.tau >= 0.0);
        }

        #[test]
        fn budget_rule_is_saturating_and_monotone((xi, dc, extra, alpha, phi) in instance(), more in 0.0f64..1.0) {
            let k = alpha * phi + extra;
            let a = solve_rule_at_budget(&xi, &dc, k, alpha, phi).unwrap();
            let b = solve_rule_at_budget(&xi, &dc, k + more, alpha, phi).unwrap();
            let va = a.rule.values(xi.len());
            let vb = b.rule.values(xi.len());
            for (x, y) in va.iter().zip(&vb) {
                prop_assert!(*y >= *x - 1e-12);
            }
            prop_assert!(a.tau >= 0.0 && b.tau >= 0.0);
            let n = xi.len() as f64;
            let cost: f64 = va.iter().zip(&dc).map(|(r, d)| r * d).sum::<f64>() / n;
            let total: f64 = dc.iter().sum::<f64>() / n;
            // Saturates the budget unless everyone is treated.
            let expect = extra.min(total);
            prop_assert!((cost - expect).abs() <= 1e-12, "cost {cost} expect {expect}");
        }
    }
}
