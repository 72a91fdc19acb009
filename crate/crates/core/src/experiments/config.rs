//! TOML study configurations.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::erm::Criterion;
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::oracle::ModelSpec;

use super::families::FamilyConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl GridConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Config("grid.n needs at least one positive sample size".into()));
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid.n must be strictly increasing".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("grid.reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// What the excess of a selected scorer is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The optimal scorer of the model.
    #[default]
    Bayes,
    /// The best member of the (finite) family.
    Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    pub name: Criterion,
    pub u0: f64,
    #[serde(default)]
    pub reference: Reference,
}

/// Acceptance band for a fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub slope: [f64; 2],
    /// Exponent the band is centred on; reported only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl BandConfig {
    pub fn contains(&self, slope: f64) -> bool {
        slope >= self.slope[0] && slope <= self.slope[1]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Defaults to the family size for finite families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub model: ModelSpec,
    pub family: FamilyConfig,
    pub criterion: CriterionConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandConfig>,
    #[serde(default)]
    pub search: SearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompBand {
    #[serde(default = "default_lambda_band")]
    pub lambda_slope: [f64; 2],
    /// Allowed relative gap between `n Var(Z_n)` and `sigma^2`.
    #[serde(default = "default_sigma_tolerance")]
    pub sigma_rel_tol: f64,
    /// Smallest `n` at which the variance check applies.
    #[serde(default = "default_sigma_min_n")]
    pub sigma_min_n: usize,
}

fn default_lambda_band() -> [f64; 2] {
    [-1.4, -0.6]
}

fn default_sigma_tolerance() -> f64 {
    0.1
}

fn default_sigma_min_n() -> usize {
    1000
}

impl Default for DecompBand {
    fn default() -> Self {
        DecompBand {
            lambda_slope: default_lambda_band(),
            sigma_rel_tol: default_sigma_tolerance(),
            sigma_min_n: default_sigma_min_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompConfig {
    pub model: ModelSpec,
    #[serde(default = "ScoringModel::identity")]
    pub scorer: ScoringModel,
    /// Mass level `v` of the plug-in quantile.
    pub v: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub band: DecompBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub u0: Vec<f64>,
    /// Sample size of the concentration checks; 0 skips them.
    #[serde(default)]
    pub n_empirical: usize,
    /// Tolerance of `|locauc_hat - locauc|` at `n_empirical`.
    #[serde(default = "default_concentration_tol")]
    pub concentration_tol: f64,
    /// Number of samples on which the finite-sample identities are checked.
    #[serde(default = "default_exact_samples")]
    pub exact_samples: usize,
    #[serde(default = "default_exact_n")]
    pub exact_n: usize,
    /// Random piecewise-linear scorers added to the listed ones.
    #[serde(default)]
    pub random_scorers: usize,
    #[serde(default = "default_segments")]
    pub random_segments: usize,
    pub seed: u64,
}

fn default_concentration_tol() -> f64 {
    5e-3
}

fn default_exact_samples() -> usize {
    1000
}

fn default_exact_n() -> usize {
    40
}

fn default_segments() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub scorers: Vec<ScoringModel>,
    pub suite: SuiteConfig,
}

/// Parses a TOML config from text.
pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Reads and parses a TOML config file.
pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
