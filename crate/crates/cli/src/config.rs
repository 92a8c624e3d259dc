//! Run configuration: one TOML file with a section per sub-config.

use std::path::{Path, PathBuf};

use irrl_core::learner::TrainConfig;
use irrl_core::policy::{Architecture, InputScaling};
use irrl_core::EnvConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingChoice {
    /// Raw state values.
    #[default]
    None,
    /// Divide by typical seasonal magnitudes.
    Typical,
    /// Map typical ranges onto [-1, 1].
    Centered,
}

impl ScalingChoice {
    pub fn scaling(self) -> Option<InputScaling> {
        match self {
            ScalingChoice::None => None,
            ScalingChoice::Typical => Some(InputScaling::typical_magnitudes()),
            ScalingChoice::Centered => Some(InputScaling::centered()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub hidden_dims: Vec<usize>,
    pub bias_on_first_hidden: bool,
    pub input_scaling: ScalingChoice,
}

impl Default for PolicySection {
    fn default() -> Self {
        let arch = Architecture::default();
        PolicySection {
            hidden_dims: arch.hidden_dims,
            bias_on_first_hidden: arch.bias_on_first_hidden,
            input_scaling: ScalingChoice::None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of training weather CSVs.
    pub train_weather: Option<PathBuf>,
    /// Directory of held-out weather CSVs.
    pub test_weather: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to evaluate; `train` writes `<out>/best.ckpt`.
    pub checkpoint: Option<PathBuf>,
    /// Benchmark CSV whose profits fill the results `benchmark` column.
    pub benchmark: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub replicates: usize,
    /// Round state columns of trace files to display precision.
    pub paper_format: bool,
    pub write_traces: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            replicates: 30,
            paper_format: false,
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub budget: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection { budget: 20_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub policy: PolicySection,
    pub train: TrainConfig,
    pub paths: Paths,
    pub evaluate: EvaluateSection,
    pub benchmark: BenchmarkSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid config: {}", one_line(&e.to_string()))))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden_dims: self.policy.hidden_dims.clone(),
            bias_on_first_hidden: self.policy.bias_on_first_hidden,
            output_dim: self.env.actions.len(),
            ..Architecture::default()
        }
    }

    pub fn scaling(&self) -> Option<InputScaling> {
        self.policy.input_scaling.scaling()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks every sub-config; paths are checked by the commands that use them.
    pub fn validate(&self) -> Result<(), CliError> {
        self.env.validate().map_err(|e| CliError::config(format!("[env] {e}")))?;
        self.architecture()
            .validate()
            .map_err(|e| CliError::config(format!("[policy] {e}")))?;
        self.train.validate().map_err(|e| CliError::config(format!("[train] {e}")))?;
        if self.evaluate.replicates == 0 {
            return Err(CliError::config("[evaluate] replicates must be >= 1"));
        }
        if self.benchmark.budget == 0 {
            return Err(CliError::config("[benchmark] budget must be >= 1"));
        }
        Ok(())
    }
}

/// Resolves an optional path setting that a command requires to exist.
pub fn require_path(value: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
    let path = value
        .clone()
        .ok_or_else(|| CliError::config(format!("{key} is not set")))?;
    if !path.exists() {
        return Err(CliError::config(format!("{key}: {} does not exist", path.display())));
    }
    Ok(path)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(irrl_core::policy::param_count(&c.architecture()), 1_448_005);
        assert_eq!(c.train.alpha, 1e-7);
        assert_eq!(c.evaluate.replicates, 30);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"
            [env]
            max_days = 200
            [env.econ]
            water_cost_c = 0.5
            [policy]
            hidden_dims = [16]
            input_scaling = "typical"
            [train]
            episodes_n = 50
            alpha = 1e-5
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.env.econ.water_cost_c, 0.5);
        assert_eq!(c.env.econ.grain_price_p, 0.25);
        assert_eq!(c.architecture().hidden_dims, vec![16]);
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(RunConfig::from_toml("[train]\nepisodes = 3").is_err());
        let c = RunConfig::from_toml("[train]\nalpha = -1.0").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("[env.econ]\ngrain_price_p = -0.25").unwrap();
        assert!(c.validate().is_err());
    }
}
