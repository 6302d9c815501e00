//! Simulation data-generating processes, their closed-form nuisance
//! functions, ground-truth ATEs, and per-replication bookkeeping for Monte
//! Carlo studies.
//!
//! Two processes are registered:
//!
//! * `main`: three covariates, a binary treatment that acts on the outcome
//!   only through a binary cost, and an unobserved cost-outcome confounder.
//! * `parametric`: one uniform covariate with logistic-linear treatment,
//!   cost and outcome models.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, ProblemConfig, ReferenceKind};
use crate::error::{Error, Result};
use crate::learners::Basis;
use crate::math::{expit, mean, median, sample_sd};
use crate::nuisance::NuisanceSpecs;
use crate::pipeline::Estimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpId {
    Main,
    Parametric,
}

impl DgpId {
    /// Covariate dimension.
    pub fn dim(self) -> usize {
        match self {
            DgpId::Main => 3,
            DgpId::Parametric => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DgpId::Main => "main",
            DgpId::Parametric => "parametric",
        }
    }

    pub fn covariate_names(self) -> Vec<String> {
        match self {
            DgpId::Main => ["w1", "w2", "w3"].iter().map(|s| s.to_string()).collect(),
            DgpId::Parametric => alloc::vec!["w".to_string()],
        }
    }

    /// Budget at which the constraint is active.
    pub fn default_kappa(self) -> f64 {
        match self {
            DgpId::Main => 0.68,
            DgpId::Parametric => 0.35,
        }
    }
}

impl FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(DgpId::Main),
            "parametric" => Ok(DgpId::Parametric),
            other => Err(Error::UnknownOracle(format!("no DGP named '{other}'"))),
        }
    }
}

/// Nuisance function served by the oracle learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    MuY,
    MuC,
    MuT,
    DeltaY,
    DeltaC,
}

impl Target {
    /// Whether predictors are `(t, w)` rather than `w`.
    pub fn takes_treatment(self) -> bool {
        matches!(self, Target::MuY | Target::MuC)
    }
}

fn main_cost_index(t: f64, w: &[f64], u: f64) -> f64 {
    2.0 * t - 1.0 - w[0] + 0.2 * w[1] + 0.7 * w[2] + 2.0 * w[0] * w[1] + 0.5 * u
}

fn main_outcome_index(c: f64, w: &[f64], u: f64) -> f64 {
    -0.3 * c + c * w[1] - w[0] + 0.2 * w[1] - 0.9 * w[2] + 0.3 * c * u
}

/// `E[Y | T = t, W = w]`.
pub fn mu_y(dgp: DgpId, t: u8, w: &[f64]) -> f64 {
    let t = f64::from(t);
    match dgp {
        DgpId::Main => {
            // Integrate over U ~ Bern(0.5) and C | T, W, U.
            let mut acc = 0.0;
            for u in [0.0, 1.0] {
                let pc = expit(main_cost_index(t, w, u));
                acc += 0.5 * (pc * expit(main_outcome_index(1.0, w, u)) + (1.0 - pc) * expit(main_outcome_index(0.0, w, u)));
            }
            acc
        }
        DgpId::Parametric => expit(1.4 * t - 0.7 - 0.3 * w[0]),
    }
}

/// `E[C | T = t, W = w]`.
pub fn mu_c(dgp: DgpId, t: u8, w: &[f64]) -> f64 {
    let t = f64::from(t);
    match dgp {
        DgpId::Main => 0.5 * (expit(main_cost_index(t, w, 0.0)) + expit(main_cost_index(t, w, 1.0))),
        DgpId::Parametric => expit(2.0 * t - 1.0 + w[0]),
    }
}

/// `P(T = 1 | W = w)`.
pub fn mu_t(dgp: DgpId, w: &[f64]) -> f64 {
    match dgp {
        DgpId::Main => expit(2.5 * w[0] + 0.5 * w[1] * w[2]),
        DgpId::Parametric => expit(w[0]),
    }
}

pub fn delta_y(dgp: DgpId, w: &[f64]) -> f64 {
    mu_y(dgp, 1, w) - mu_y(dgp, 0, w)
}

pub fn delta_c(dgp: DgpId, w: &[f64]) -> f64 {
    mu_c(dgp, 1, w) - mu_c(dgp, 0, w)
}

#[inline]
fn bern<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn draw_w<R: RngCore + ?Sized>(dgp: DgpId, rng: &mut R) -> Vec<f64> {
    match dgp {
        DgpId::Main => {
            let w1 = rng.random_range(-1.0..1.0);
            let w2 = bern(rng, 0.8);
            let w3: f64 = rng.sample(StandardNormal);
            alloc::vec![w1, w2, w3]
        }
        DgpId::Parametric => alloc::vec![rng.random_range(-1.0..1.0)],
    }
}

/// Draw `n` observations. `V = W`.
pub fn generate<R: RngCore + ?Sized>(dgp: DgpId, n: usize, rng: &mut R) -> Dataset {
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let w = draw_w(dgp, rng);
        let t = bern(rng, mu_t(dgp, &w));
        let (c, y) = match dgp {
            DgpId::Main => {
                let u = bern(rng, 0.5);
                let c = bern(rng, expit(main_cost_index(t, &w, u)));
                (c, bern(rng, expit(main_outcome_index(c, &w, u))))
            }
            DgpId::Parametric => {
                let c = bern(rng, expit(2.0 * t - 1.0 + w[0]));
                (c, bern(rng, expit(1.4 * t - 0.7 - 0.3 * w[0])))
            }
        };
        obs.push(Observation::new(w, t as u8, c, y));
    }
    let dim = dgp.dim();
    Dataset::new(obs, (0..dim).collect(), dgp.covariate_names()).expect("simulated data is valid")
}

/// A simulation study: which process, and whether nuisances are the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub dgp: DgpId,
    pub oracle: bool,
}

impl Scenario {
    pub fn new(dgp: DgpId, oracle: bool) -> Self {
        Self { dgp, oracle }
    }

    /// Active budget, `alpha = 1`, bounded fluctuations for the binary cost
    /// and outcome, and ten cross-fitting folds.
    pub fn config(&self) -> ProblemConfig {
        let mut cfg = ProblemConfig::new(self.dgp.default_kappa(), 1.0);
        cfg.y_bounds = Some((0.0, 1.0));
        cfg.c_bounds = Some((0.0, 1.0));
        cfg.folds = 10;
        cfg
    }

    /// Oracle learners, or logistic regressions on main effects for the
    /// parametric process and main effects plus pairwise products otherwise.
    pub fn specs(&self) -> NuisanceSpecs {
        if self.oracle {
            return NuisanceSpecs::oracle(self.dgp);
        }
        match self.dgp {
            DgpId::Main => NuisanceSpecs::logistic(Basis::Pairwise),
            DgpId::Parametric => NuisanceSpecs::logistic(Basis::Main),
        }
    }
}

/// Population quantities of a DGP under a given problem configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub dgp: DgpId,
    pub samples: usize,
    /// `E[mu^C(0, W)]`.
    pub phi0: f64,
    #[serde(with = "crate::math::ext_f64")]
    pub eta0: f64,
    pub tau0: f64,
    /// Constant treatment probability of the random reference rule.
    pub rd0: f64,
    /// Value contrast `E[rho_0(V) Delta^Y(W)]` against never treating.
    pub value0: f64,
    pub psi: Vec<(ReferenceKind, f64)>,
}

impl Truth {
    pub fn psi_for(&self, kind: ReferenceKind) -> Option<f64> {
        self.psi.iter().find(|(k, _)| *k == kind).map(|&(_, v)| v)
    }
}

/// Running sums over a truth sample.
#[derive(Default)]
struct TruthSums {
    mu_c0: f64,
    delta_c: f64,
    delta_y: f64,
    mu_t_delta_y: f64,
}

fn truth_from_points(dgp: DgpId, cfg: &ProblemConfig, points: impl Iterator<Item = Vec<f64>>) -> Result<Truth> {
    let mut sums = TruthSums::default();
    let mut items: Vec<(f64, f64)> = Vec::new();
    for w in points {
        let c0 = mu_c(dgp, 0, &w);
        let d_c = mu_c(dgp, 1, &w) - c0;
        let d_y = delta_y(dgp, &w);
        sums.mu_c0 += c0;
        sums.delta_c += d_c;
        sums.delta_y += d_y;
        sums.mu_t_delta_y += mu_t(dgp, &w) * d_y;
        items.push((d_y / d_c, d_c));
    }
    let m = items.len();
    if m == 0 {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let mf = m as f64;
    let phi0 = sums.mu_c0 / mf;
    let budget = cfg.kappa - cfg.alpha * phi0;
    if budget < 0.0 {
        return Err(Error::InfeasibleBudget {
            alpha_phi: cfg.alpha * phi0,
            kappa: cfg.kappa,
        });
    }
    // Greedy fill in decreasing xi, one tie group at a time.
    items.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut eta0 = f64::NEG_INFINITY;
    let mut spent = 0.0;
    let mut value0 = 0.0;
    let mut i = 0;
    while i < m {
        let level = items[i].0;
        let mut j = i;
        let (mut g, mut v) = (0.0, 0.0);
        while j < m && items[j].0 == level {
            g += items[j].1 / mf;
            v += items[j].0 * items[j].1 / mf;
            j += 1;
        }
        let p = if spent + g <= budget { 1.0 } else { (budget - spent) / g };
        if level > 0.0 {
            value0 += p * v;
        }
        if p < 1.0 {
            eta0 = level;
            break;
        }
        spent += g;
        i = j;
    }
    let mean_dy = sums.delta_y / mf;
    let rd0 = if cfg.kappa.is_infinite() {
        1.0
    } else {
        ((cfg.kappa - cfg.alpha * phi0) / (sums.delta_c / mf)).min(1.0)
    };
    let psi = cfg
        .references
        .iter()
        .map(|&k| {
            let v = match k {
                ReferenceKind::FR => value0 - cfg.fr_constant * mean_dy,
                ReferenceKind::RD => value0 - rd0 * mean_dy,
                ReferenceKind::TP => value0 - sums.mu_t_delta_y / mf,
            };
            (k, v)
        })
        .collect();
    Ok(Truth {
        dgp,
        samples: m,
        phi0,
        eta0,
        tau0: eta0.max(0.0),
        rd0,
        value0,
        psi,
    })
}

/// Ground-truth ATEs by Monte Carlo over `W` with the closed-form nuisance
/// functions. The optimal rule is the knapsack solution on the sample.
pub fn truth_psi0<R: RngCore + ?Sized>(dgp: DgpId, cfg: &ProblemConfig, samples: usize, rng: &mut R) -> Result<Truth> {
    let mut left = samples;
    let points = core::iter::from_fn(|| {
        if left == 0 {
            return None;
        }
        left -= 1;
        Some(draw_w(dgp, rng))
    });
    truth_from_points(dgp, cfg, points)
}

/// Ground truth for the one-dimensional parametric process by the midpoint
/// rule on `points` nodes over `(-1, 1)`.
pub fn truth_quadrature(cfg: &ProblemConfig, points: usize) -> Result<Truth> {
    let h = 2.0 / points as f64;
    let nodes = (0..points).map(move |i| alloc::vec![-1.0 + (i as f64 + 0.5) * h]);
    truth_from_points(DgpId::Parametric, cfg, nodes)
}

/// One reference's estimate within a replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepEstimate {
    pub reference: ReferenceKind,
    pub psi: f64,
    pub sigma: f64,
    pub ci95: (f64, f64),
    pub lower975: f64,
}

/// Result of a single Monte Carlo replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub estimates: Vec<RepEstimate>,
    pub saturated: bool,
    pub k_n: f64,
    /// Largest fluctuation score `|sum H (Z - fitted)| / n` across targets.
    pub max_score: f64,
    /// Calibration budget term; zero up to solver tolerance when saturated.
    pub budget_residual: f64,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    fn failed(rep: u64, e: &Error) -> Self {
        Self {
            rep,
            estimates: Vec::new(),
            saturated: false,
            k_n: f64::NAN,
            max_score: f64::NAN,
            budget_residual: f64::NAN,
            failure: Some(e.to_string()),
        }
    }
}

/// Simulate one dataset with `rng` and run the full estimator on it. Fold
/// assignment continues from the same stream.
pub fn run_replication<R: RngCore + ?Sized>(
    rep: u64,
    dgp: DgpId,
    est: &Estimator,
    n: usize,
    rng: &mut R,
) -> ReplicationRecord {
    let ds = generate(dgp, n, rng);
    match est.run_with_rng(&ds, rng) {
        Ok(run) => ReplicationRecord {
            rep,
            estimates: run
                .references
                .iter()
                .map(|r| RepEstimate {
                    reference: r.estimate.reference,
                    psi: r.estimate.psi,
                    sigma: r.estimate.sigma,
                    ci95: r.estimate.ci95,
                    lower975: r.estimate.lower975,
                })
                .collect(),
            saturated: run.knapsack.saturated,
            k_n: run.knapsack.k_n,
            max_score: run.max_score(),
            budget_residual: run.budget_residual,
            failure: None,
        },
        Err(e) => ReplicationRecord::failed(rep, &e),
    }
}

/// Performance of the estimator against one reference rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSummary {
    pub reference: ReferenceKind,
    pub psi0: f64,
    pub coverage_95: f64,
    pub coverage_lower_975: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Mean standard error over the standard deviation of the estimates.
    pub se_sd_ratio: f64,
    pub mean_se: f64,
    pub sd_psi: f64,
    pub median_scaled_width: f64,
    /// `sqrt(n)` times the 95% interval width, one per successful replication.
    pub scaled_ci_widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub dgp: DgpId,
    pub oracle: bool,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub failed: usize,
    pub failures: Vec<(u64, String)>,
    pub saturated_frac: f64,
    pub max_score: f64,
    /// Largest budget residual over saturated replications.
    pub max_budget_residual: f64,
    pub truth: Truth,
    pub references: Vec<ReferenceSummary>,
}

/// Aggregate replication records. Records are sorted by replication index
/// first, so the report does not depend on execution order.
pub fn summarize(
    scenario: Scenario,
    n: usize,
    seed: u64,
    truth: &Truth,
    mut records: Vec<ReplicationRecord>,
) -> SimulationReport {
    records.sort_by_key(|r| r.rep);
    let reps = records.len();
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let failures: Vec<(u64, String)> = records
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| (r.rep, f.clone())))
        .collect();
    let sqrt_n = libm::sqrt(n as f64);
    let references = truth
        .psi
        .iter()
        .map(|&(kind, psi0)| {
            let ests: Vec<&RepEstimate> = ok
                .iter()
                .filter_map(|r| r.estimates.iter().find(|e| e.reference == kind))
                .collect();
            let m = ests.len() as f64;
            let psis: Vec<f64> = ests.iter().map(|e| e.psi).collect();
            let frac = |f: &dyn Fn(&RepEstimate) -> bool| ests.iter().filter(|e| f(e)).count() as f64 / m;
            let bias = mean(&psis) - psi0;
            let mse = psis.iter().map(|p| (p - psi0) * (p - psi0)).sum::<f64>() / m;
            let ses: Vec<f64> = ests.iter().map(|e| e.sigma / sqrt_n).collect();
            let mean_se = mean(&ses);
            let sd_psi = sample_sd(&psis);
            let widths: Vec<f64> = ests.iter().map(|e| sqrt_n * (e.ci95.1 - e.ci95.0)).collect();
            ReferenceSummary {
                reference: kind,
                psi0,
                coverage_95: frac(&|e| e.ci95.0 <= psi0 && psi0 <= e.ci95.1),
                coverage_lower_975: frac(&|e| e.lower975 <= psi0),
                bias,
                rmse: libm::sqrt(mse),
                se_sd_ratio: mean_se / sd_psi,
                mean_se,
                sd_psi,
                median_scaled_width: median(&widths),
                scaled_ci_widths: widths,
            }
        })
        .collect();
    let fold_max = |f: &dyn Fn(&ReplicationRecord) -> Option<f64>| {
        ok.iter().filter_map(|r| f(r)).fold(0.0, f64::max)
    };
    SimulationReport {
        dgp: scenario.dgp,
        oracle: scenario.oracle,
        n,
        reps,
        seed,
        failed: failures.len(),
        failures,
        saturated_frac: ok.iter().filter(|r| r.saturated).count() as f64 / ok.len().max(1) as f64,
        max_score: fold_max(&|r| Some(r.max_score)),
        max_budget_residual: fold_max(&|r| r.saturated.then_some(libm::fabs(r.budget_residual))),
        truth: truth.clone(),
        references,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parametric_closed_forms() {
        assert_eq!(mu_t(DgpId::Parametric, &[0.0]), 0.5);
        assert_eq!(mu_y(DgpId::Parametric, 1, &[0.0]), expit(0.7));
        assert_eq!(mu_c(DgpId::Parametric, 0, &[0.0]), expit(-1.0));
    }

    #[test]
    fn main_closed_forms_match_simulation() {
        // Conditional means at a fixed w against brute-force simulation of U, C, Y.
        let w = [0.3, 1.0, -0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 400_000;
        for t in [0u8, 1] {
            let (mut cs, mut ys) = (0.0, 0.0);
            for _ in 0..m {
                let u = bern(&mut rng, 0.5);
                let c = bern(&mut rng, expit(main_cost_index(f64::from(t), &w, u)));
                ys += bern(&mut rng, expit(main_outcome_index(c, &w, u)));
                cs += c;
            }
            assert!((cs / m as f64 - mu_c(DgpId::Main, t, &w)).abs() < 0.004);
            assert!((ys / m as f64 - mu_y(DgpId::Main, t, &w)).abs() < 0.004);
        }
    }

    #[test]
    fn generate_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = generate(DgpId::Parametric, 1_000_000, &mut rng);
        let pt = ds.observations().iter().map(|o| o.t_f64()).sum::<f64>() / 1e6;
        assert!((pt - 0.5).abs() < 0.002, "{pt}");

        let ds = generate(DgpId::Main, 1_000_000, &mut rng);
        let w2 = ds.observations().iter().map(|o| o.w[1]).sum::<f64>() / 1e6;
        assert!((w2 - 0.8).abs() < 0.002, "{w2}");
        assert_eq!(ds.covariate_names(), &["w1", "w2", "w3"]);
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate(DgpId::Main, 500, &mut ChaCha8Rng::seed_from_u64(5));
        let b = generate(DgpId::Main, 500, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    /// Composite Simpson integral of the parametric outcome contrast over
    /// W ~ Unif(-1, 1).
    fn simpson_mean_delta_y(m: usize) -> f64 {
        let f = |w: f64| expit(0.7 - 0.3 * w) - expit(-0.7 - 0.3 * w);
        let h = 2.0 / m as f64;
        let mut s = f(-1.0) + f(1.0);
        for i in 1..m {
            let w = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(w) } else { 2.0 * f(w) };
        }
        s * h / 3.0 / 2.0
    }

    #[test]
    fn unconstrained_parametric_truth_is_mean_contrast() {
        let cfg = ProblemConfig::new(f64::INFINITY, 1.0);
        let t = truth_quadrature(&cfg, 100_000).unwrap();
        assert_eq!(t.rd0, 1.0);
        let expect = simpson_mean_delta_y(1000);
        assert!((t.psi_for(ReferenceKind::FR).unwrap() - expect).abs() < 1e-8);
        assert!(t.psi_for(ReferenceKind::RD).unwrap().abs() < 1e-12);
    }

    #[test]
    fn parametric_truth_active_constraint() {
        let cfg = Scenario::new(DgpId::Parametric, false).config();
        let q = truth_quadrature(&cfg, 200_000).unwrap();
        assert!(q.tau0 > 0.0, "constraint should bind");
        assert!(q.rd0 < 1.0);
        let mc = truth_psi0(DgpId::Parametric, &cfg, 1_000_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for k in ReferenceKind::ALL {
            assert!((q.psi_for(k).unwrap() - mc.psi_for(k).unwrap()).abs() < 2e-3);
        }
    }

    #[test]
    fn main_truth_active_and_reproducible() {
        let cfg = Scenario::new(DgpId::Main, true).config();
        let a = truth_psi0(DgpId::Main, &cfg, 1_000_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = truth_psi0(DgpId::Main, &cfg, 1_000_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(a.tau0 > 0.0 && a.rd0 < 1.0);
        for k in ReferenceKind::ALL {
            assert!((a.psi_for(k).unwrap() - b.psi_for(k).unwrap()).abs() < 1e-3);
        }
    }

    fn record(rep: u64, psi: f64, sigma: f64) -> ReplicationRecord {
        ReplicationRecord {
            rep,
            estimates: alloc::vec![RepEstimate {
                reference: ReferenceKind::FR,
                psi,
                sigma,
                ci95: (psi - sigma, psi + sigma),
                lower975: psi - sigma,
            }],
            saturated: true,
            k_n: 0.3,
            max_score: 0.0,
            budget_residual: 0.0,
            failure: None,
        }
    }

    fn fr_truth(psi0: f64) -> Truth {
        Truth {
            dgp: DgpId::Parametric,
            samples: 1,
            phi0: 0.0,
            eta0: 0.0,
            tau0: 0.0,
            rd0: 1.0,
            value0: psi0,
            psi: alloc::vec![(ReferenceKind::FR, psi0)],
        }
    }

    #[test]
    fn single_replication_summary() {
        let sc = Scenario::new(DgpId::Parametric, true);
        let r = summarize(sc, 100, 0, &fr_truth(0.1), alloc::vec![record(0, 0.3, 0.1)]);
        let s = &r.references[0];
        assert_eq!(s.coverage_95, 0.0);
        assert!((s.rmse - s.bias.abs()).abs() < 1e-15);
        let r = summarize(sc, 100, 0, &fr_truth(0.25), alloc::vec![record(0, 0.3, 0.1)]);
        assert_eq!(r.references[0].coverage_95, 1.0);
    }

    #[test]
    fn summary_is_order_invariant_and_counts_failures() {
        let sc = Scenario::new(DgpId::Parametric, true);
        let truth = fr_truth(0.2);
        let mut recs: Vec<ReplicationRecord> = (0..20).map(|i| record(i, 0.2 + 0.01 * i as f64, 0.05)).collect();
        recs.push(ReplicationRecord::failed(20, &Error::Config("boom".into())));
        let a = summarize(sc, 400, 9, &truth, recs.clone());
        recs.reverse();
        let b = summarize(sc, 400, 9, &truth, recs);
        assert_eq!(a, b);
        assert_eq!(a.failed, 1);
        assert_eq!(a.references[0].scaled_ci_widths.len(), 20);
        assert!(a.references[0].rmse >= a.references[0].bias.abs());
    }
}
