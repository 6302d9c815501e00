//! JSON outputs and their run manifests.

use std::path::Path;

use itr_core::knapsack::TreatmentRule;
use itr_core::math::ext_f64;
use itr_core::pipeline::{EstimationRun, ReferenceRun};
use itr_core::{AteEstimate, ProblemConfig, ValidationReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Error;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_digest: Option<String>,
    pub input_digests: Vec<InputDigest>,
    pub seed: u64,
    /// Only recorded on request so that reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_digest: None,
            input_digests: Vec::new(),
            seed,
            wall_clock_secs: None,
        }
    }

    pub fn with_config(mut self, bytes: Option<&[u8]>) -> Self {
        self.config_digest = bytes.map(sha256_hex);
        self
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }
}

/// The estimated rule, with per-observation `xi` and `rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleExport {
    #[serde(with = "ext_f64")]
    pub eta: f64,
    pub boundary_prob: f64,
    pub phi_n: f64,
    #[serde(with = "ext_f64")]
    pub eta_kappa: f64,
    pub tau_kappa: f64,
    #[serde(with = "ext_f64")]
    pub k_n: f64,
    pub saturated: bool,
    pub calibration_roots: usize,
    pub boundary_clamped: bool,
    pub xi: Vec<f64>,
    pub rho: Vec<f64>,
}

impl RuleExport {
    pub fn from_run(run: &EstimationRun) -> Self {
        let k = &run.knapsack;
        let (eta, boundary_prob) = match &k.rule {
            TreatmentRule::Threshold { eta, boundary_prob, .. } => (*eta, *boundary_prob),
            _ => (f64::NAN, f64::NAN),
        };
        Self {
            eta,
            boundary_prob,
            phi_n: k.phi_n,
            eta_kappa: k.eta_kappa,
            tau_kappa: k.tau_kappa,
            k_n: k.k_n,
            saturated: k.saturated,
            calibration_roots: k.calibration.roots,
            boundary_clamped: k.boundary_clamped,
            xi: run.nuisance.xi.clone(),
            rho: run.rho.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceDiagnostics {
    pub reference: itr_core::ReferenceKind,
    pub rd_value: Option<f64>,
    pub rd_clamped: bool,
    pub cost_epsilon: Option<f64>,
    pub cost_score: Option<f64>,
    pub outcome_epsilon: f64,
    pub outcome_score: f64,
}

impl From<&ReferenceRun> for ReferenceDiagnostics {
    fn from(r: &ReferenceRun) -> Self {
        let tc = r.fit.targeted_cost.as_ref();
        Self {
            reference: r.fit.kind,
            rd_value: r.fit.rd_value,
            rd_clamped: r.fit.rd_clamped,
            cost_epsilon: tc.map(|t| t.fit.epsilon),
            cost_score: tc.map(|t| t.fit.score),
            outcome_epsilon: r.outcome_epsilon,
            outcome_score: r.outcome_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub manifest: RunManifest,
    pub problem: ProblemConfig,
    pub validation: ValidationReport,
    pub rule: RuleExport,
    pub estimates: Vec<AteEstimate>,
    pub diagnostics: Vec<ReferenceDiagnostics>,
    pub budget_residual: f64,
}

impl EstimateReport {
    pub fn new(manifest: RunManifest, problem: ProblemConfig, run: &EstimationRun) -> Self {
        Self {
            manifest,
            problem,
            validation: run.validation.clone(),
            rule: RuleExport::from_run(run),
            estimates: run.references.iter().map(|r| r.estimate.clone()).collect(),
            diagnostics: run.references.iter().map(ReferenceDiagnostics::from).collect(),
            budget_residual: run.budget_residual,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    std::fs::write(path, to_json(value)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
