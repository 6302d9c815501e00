//! End-to-end estimation: nuisances, knapsack rule, reference rules, and
//! targeted ATE estimates.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{validate_conditions, Dataset, ProblemConfig, ValidationReport};
use crate::error::Result;
use crate::knapsack::{fit_knapsack, KnapsackFit};
use crate::nuisance::{cross_fit_xi, fit_bundle, CrossFitPlan, NuisanceSpecs, NuisanceValues};
use crate::reference::{fit_reference, ReferenceFit};
use crate::tmle::{estimate_ate, infer, target_outcome_regression, AteEstimate, GradientContext};

/// Default seed for fold assignment.
pub const DEFAULT_FOLD_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub specs: NuisanceSpecs,
    pub cfg: ProblemConfig,
    pub fold_seed: u64,
}

/// Estimate against one reference rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRun {
    pub fit: ReferenceFit,
    pub estimate: AteEstimate,
    pub outcome_epsilon: f64,
    /// `|sum H (Y - targeted mu^Y)| / n`.
    pub outcome_score: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub validation: ValidationReport,
    pub nuisance: NuisanceValues,
    pub knapsack: KnapsackFit,
    /// `rho_n(V_i)` for every observation.
    pub rho: Vec<f64>,
    pub references: Vec<ReferenceRun>,
    /// Calibration budget term evaluated at `rho_n`.
    pub budget_residual: f64,
}

impl EstimationRun {
    /// Largest per-observation fluctuation score over all targeting steps.
    pub fn max_score(&self) -> f64 {
        let n = self.rho.len() as f64;
        self.references
            .iter()
            .flat_map(|r| {
                let cost = r.fit.targeted_cost.as_ref().map(|t| libm::fabs(t.fit.score) / n);
                core::iter::once(r.outcome_score).chain(cost)
            })
            .fold(0.0, f64::max)
    }
}

impl Estimator {
    pub fn new(specs: NuisanceSpecs, cfg: ProblemConfig) -> Self {
        Self {
            specs,
            cfg,
            fold_seed: DEFAULT_FOLD_SEED,
        }
    }

    pub fn run(&self, ds: &Dataset) -> Result<EstimationRun> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.fold_seed);
        self.run_with_rng(ds, &mut rng)
    }

    /// Run with fold assignment drawn from `rng`.
    pub fn run_with_rng<R: RngCore + ?Sized>(&self, ds: &Dataset, rng: &mut R) -> Result<EstimationRun> {
        let cfg = &self.cfg;
        cfg.validate()?;
        let n = ds.n();
        let bundle = fit_bundle(ds, &self.specs, cfg)?;
        let mut nv = bundle.evaluate(ds);
        if cfg.folds > 1 {
            let plan = CrossFitPlan::new(n, cfg.folds, rng)?;
            nv = nv.with_cross_fit(cross_fit_xi(ds, &self.specs, cfg, &plan)?);
        }
        let validation = validate_conditions(ds, cfg, &nv)?;
        let knapsack = fit_knapsack(ds, &nv, cfg)?;
        let rho = knapsack.rule.values(n);

        let mut references = Vec::with_capacity(cfg.references.len());
        let mut budget_residual = f64::NAN;
        for &kind in &cfg.references {
            let fit = fit_reference(kind, ds, &nv, knapsack.phi_n, cfg)?;
            let rho_ref = fit.rule.values(n);
            let outcome = target_outcome_regression(ds, &nv, &rho, &rho_ref, cfg)?;
            let delta_y: Vec<f64> = (0..n).map(|i| outcome.delta(i)).collect();
            let psi = estimate_ate(&rho, &rho_ref, &delta_y);
            let ctx = GradientContext {
                ds,
                nv: &nv,
                outcome: &outcome,
                rho: &rho,
                tau: knapsack.tau_n,
                phi_n: knapsack.phi_n,
                cfg,
            };
            if budget_residual.is_nan() {
                budget_residual = ctx.budget_residual();
            }
            let d = ctx.eval_d_reference(&fit)?;
            let estimate = infer(kind, d, psi)?;
            references.push(ReferenceRun {
                fit,
                estimate,
                outcome_epsilon: outcome.fit.epsilon,
                outcome_score: libm::fabs(outcome.fit.score) / n as f64,
            });
        }
        Ok(EstimationRun {
            validation,
            nuisance: nv,
            knapsack,
            rho,
            references,
            budget_residual,
        })
    }
}
