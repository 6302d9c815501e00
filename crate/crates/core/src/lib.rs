//! Budget-constrained optimal individualized treatment rules.
//!
//! The crate estimates a stochastic treatment rule that maximizes mean
//! outcome subject to an expected-cost budget, and produces targeted
//! (TMLE) estimates of the rule's average treatment effect relative to a
//! reference rule, with influence-function based Wald intervals.
//!
//! The pipeline, in order:
//!
//! 1. [`nuisance`] fits outcome, cost and propensity regressions with the
//!    regressions in [`learners`], optionally cross-fitting the
//!    benefit-to-cost ratio.
//! 2. [`knapsack`] solves the empirical fractional knapsack, calibrates the
//!    budget, and builds the estimated rule.
//! 3. [`reference`] builds the fixed, random and propensity reference rules.
//! 4. [`tmle`] targets the outcome regression, evaluates the plug-in ATE and
//!    its influence function, and forms confidence intervals.
//!
//! [`pipeline`] wires these steps together and [`sim`] holds the
//! data-generating processes used for Monte Carlo studies.
//!
//! The crate is `no_std` with `alloc`; enable the `std` feature to get
//! `std::error::Error` through the standard library prelude.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod knapsack;
pub mod learners;
pub mod math;
pub mod nuisance;
pub mod pipeline;
pub mod reference;
pub mod sim;
pub mod tmle;

pub use data::{Dataset, Observation, ProblemConfig, ReferenceKind, ValidationReport};
pub use error::{Error, Result};
pub use knapsack::{KnapsackFit, TreatmentRule};
pub use learners::{Basis, FittedRegression, LearnerKind, LearnerSpec};
pub use nuisance::{CrossFitPlan, NuisanceBundle, NuisanceSpecs, NuisanceValues};
pub use pipeline::{EstimationRun, Estimator};
pub use reference::ReferenceFit;
pub use sim::{DgpId, Target};
pub use tmle::AteEstimate;
