use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use resamplab::simlab::MultinormalSpec;
use resamplab::{EstimatorSpec, SamplingModel, TrainerSpec};

use crate::CliError;

/// Parsed run configuration. Each subcommand reads its own section plus the
/// shared top-level keys, `[trainer]` and `[estimator]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Caps worker threads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Relative to the config file; defaults to its directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub trainer: TrainerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_curve: Option<RatioCurveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// Dataset CSV with header `class,f1,..,fp`.
    pub data: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub n_max: u64,
    /// Self-test hook: corrupts the pmf so every check must fail.
    #[serde(default)]
    pub perturb_pmf: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub p: usize,
    pub delta: f64,
    pub n1: usize,
    pub n2: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
}

impl SimulateSection {
    pub fn spec(&self) -> MultinormalSpec {
        MultinormalSpec { p: self.p, delta: self.delta, n1: self.n1, n2: self.n2 }
    }
}

fn default_trials() -> usize {
    1000
}

fn default_test_per_class() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioCurveSection {
    pub n1_grid: Vec<usize>,
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default)]
    pub model: SamplingModel,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub th: f64,
}

fn default_b() -> usize {
    200
}

fn default_replicates() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    /// Two-column CSV `s,s_hat`.
    pub input: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {}", e.message().trim())))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::input("config: `seed` is required for randomized runs"))
    }

    pub fn section<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| CliError::input(format!("config: missing [{name}] section")))
    }
}

/// A loaded config plus the directory its relative paths resolve against.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let config = RunConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.config.output_dir {
            Some(d) => self.resolve(d),
            None => self.base.clone(),
        }
    }
}
