//! TOML run configuration: column schema, problem settings, learners and
//! seed.
//!
//! ```toml
//! seed = 7
//!
//! [schema]
//! treatment = "t"
//! cost = "c"
//! outcome = "y"
//! covariates = ["w"]
//!
//! [problem]
//! kappa = 0.35
//! y_bounds = [0.0, 1.0]
//! c_bounds = [0.0, 1.0]
//!
//! [learners]
//! preset = "logistic"
//! basis = "main"
//! ```

use std::path::Path;

use itr_core::learners::LearnerSpec;
use itr_core::{Basis, DgpId, NuisanceSpecs, ProblemConfig};
use serde::{Deserialize, Serialize};

use crate::io::Schema;
use crate::Error;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Logistic `mu^Y`, `mu^C`, `mu^T`; least-squares contrasts.
    Logistic,
    /// Least squares everywhere.
    Linear,
    /// Closed-form truth of a simulation process.
    Oracle,
}

/// Learner choices: a preset, optionally overridden per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnersConfig {
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    /// Required by the oracle preset.
    #[serde(default)]
    pub dgp: Option<DgpId>,
    #[serde(default)]
    pub mu_y: Option<LearnerSpec>,
    #[serde(default)]
    pub mu_c: Option<LearnerSpec>,
    #[serde(default)]
    pub mu_t: Option<LearnerSpec>,
    #[serde(default)]
    pub delta_y: Option<LearnerSpec>,
    #[serde(default)]
    pub delta_c: Option<LearnerSpec>,
}

fn default_preset() -> Preset {
    Preset::Logistic
}
fn default_basis() -> Basis {
    Basis::Main
}

impl Default for LearnersConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            basis: default_basis(),
            dgp: None,
            mu_y: None,
            mu_c: None,
            mu_t: None,
            delta_y: None,
            delta_c: None,
        }
    }
}

impl LearnersConfig {
    pub fn specs(&self) -> Result<NuisanceSpecs, Error> {
        let mut s = match self.preset {
            Preset::Logistic => NuisanceSpecs::logistic(self.basis),
            Preset::Linear => NuisanceSpecs {
                mu_y: LearnerSpec::linear(self.basis),
                mu_c: LearnerSpec::linear(self.basis),
                mu_t: LearnerSpec::linear(self.basis),
                delta_y: LearnerSpec::linear(self.basis),
                delta_c: LearnerSpec::linear(self.basis),
            },
            Preset::Oracle => {
                let dgp = self
                    .dgp
                    .ok_or_else(|| Error::Config("oracle learners need learners.dgp".into()))?;
                NuisanceSpecs::oracle(dgp)
            }
        };
        let over = |slot: &mut LearnerSpec, v: &Option<LearnerSpec>| {
            if let Some(v) = v {
                *slot = *v;
            }
        };
        over(&mut s.mu_y, &self.mu_y);
        over(&mut s.mu_c, &self.mu_c);
        over(&mut s.mu_t, &self.mu_t);
        over(&mut s.delta_y, &self.delta_y);
        over(&mut s.delta_c, &self.delta_c);
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub schema: Option<Schema>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub learners: Option<LearnersConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read and parse a config file, returning the raw bytes for digesting.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}
