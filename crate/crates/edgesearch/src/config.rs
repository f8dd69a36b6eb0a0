//! Engine configuration: one TOML file describing the tasks, reward
//! shaping, hardware profile, controller settings, and evaluator
//! backend for a search run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::HardwareProfile;
use crate::evolution::EvolutionConfig;
use crate::metrics::TaskSpec;
use crate::reward::RewardConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config invalid ({field}): {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("referenced file `{path}` does not exist ({field})")]
    MissingFile { field: &'static str, path: PathBuf },
}

/// Which metric source backs the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    /// Deterministic synthetic scores, optionally noisy.
    Surrogate {
        #[serde(default)]
        noise_sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Exact-match table of externally measured metrics.
    Lookup { path: PathBuf },
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig::Surrogate {
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(rename = "task")]
    pub tasks: Vec<TaskSpec>,
    pub reward: RewardConfig,
    #[serde(default)]
    pub hardware: HardwareProfile,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub evaluator: EvaluatorConfig,
    /// Input resolution as `[height, width]`.
    #[serde(default = "default_resolution")]
    pub input_resolution: [u32; 2],
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn default_resolution() -> [u32; 2] {
    [256, 256]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads, validates, and applies the `EDGESEARCH_OUTPUT_DIR` /
    /// `EDGESEARCH_SEED` environment overrides. Relative referenced
    /// paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: EngineConfig = toml::from_str(&text)?;
        if let (EvaluatorConfig::Lookup { path: table }, Some(dir)) =
            (&mut cfg.evaluator, path.parent())
        {
            if table.is_relative() {
                *table = dir.join(&table);
            }
        }
        if let Ok(dir) = std::env::var("EDGESEARCH_OUTPUT_DIR") {
            cfg.output_dir = PathBuf::from(dir);
        }
        if let Ok(seed) = std::env::var("EDGESEARCH_SEED") {
            cfg.evolution.seed = seed.parse().map_err(|_| ConfigError::Invalid {
                field: "EDGESEARCH_SEED",
                reason: format!("not an unsigned integer: `{seed}`"),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::Invalid {
                field: "schema_version",
                reason: format!(
                    "unsupported version {} (expected {})",
                    self.schema_version, CONFIG_SCHEMA_VERSION
                ),
            });
        }
        if self.tasks.is_empty() {
            return Err(ConfigError::Invalid {
                field: "task",
                reason: "at least one task is required".into(),
            });
        }
        for task in &self.tasks {
            if task.metrics.is_empty() {
                return Err(ConfigError::Invalid {
                    field: "task.metric",
                    reason: format!("task `{}` has no metrics", task.id),
                });
            }
            for metric in &task.metrics {
                if !(metric.weight > 0.0 && metric.weight.is_finite()) {
                    return Err(ConfigError::Invalid {
                        field: "task.metric.weight",
                        reason: format!(
                            "metric `{}.{}` weight must be finite and > 0, got {}",
                            task.id, metric.id, metric.weight
                        ),
                    });
                }
            }
        }
        self.reward.validate().map_err(|e| ConfigError::Invalid {
            field: "reward",
            reason: e.to_string(),
        })?;
        self.hardware.validate().map_err(|e| ConfigError::Invalid {
            field: "hardware",
            reason: e.to_string(),
        })?;
        self.evolution.validate().map_err(|e| ConfigError::Invalid {
            field: "evolution",
            reason: e.to_string(),
        })?;
        if self.input_resolution.contains(&0) {
            return Err(ConfigError::Invalid {
                field: "input_resolution",
                reason: "both dimensions must be >= 1".into(),
            });
        }
        if let EvaluatorConfig::Surrogate { noise_sigma, .. } = &self.evaluator {
            if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                return Err(ConfigError::Invalid {
                    field: "evaluator.noise_sigma",
                    reason: format!("must be finite and >= 0, got {noise_sigma}"),
                });
            }
        }
        if let EvaluatorConfig::Lookup { path } = &self.evaluator {
            if !path.exists() {
                return Err(ConfigError::MissingFile {
                    field: "evaluator.path",
                    path: path.clone(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Direction;

    const MINIMAL: &str = r#"
[[task]]
id = "segmentation"

[[task.metric]]
id = "miou"
direction = "higher_better"
scale = "percent"

[[task.metric]]
id = "pixel_accuracy"
direction = "higher_better"
scale = "percent"

[[task]]
id = "depth"

[[task.metric]]
id = "abs_err"
direction = "lower_better"

[[task.metric]]
id = "rel_err"
direction = "lower_better"

[reward]
target_latency_s = 0.025
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = EngineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.schema_version, CONFIG_SCHEMA_VERSION);
        assert_eq!(cfg.tasks.len(), 2);
        assert_eq!(cfg.tasks[0].metrics.len(), 2);
        assert_eq!(cfg.tasks[1].metrics[0].direction, Direction::LowerBetter);
        assert_eq!(cfg.tasks[1].metrics[0].weight, 1.0);
        assert_eq!(cfg.reward.p, 0.0);
        assert_eq!(cfg.reward.q, -0.07);
        assert_eq!(cfg.evolution.population_size, 50);
        assert_eq!(cfg.evolution.tournament_size, 10);
        assert_eq!(cfg.evolution.generations, 2000);
        assert_eq!(cfg.input_resolution, [256, 256]);
        assert_eq!(cfg.evaluator, EvaluatorConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace(
            "[reward]",
            "totally_unknown = 1\n[reward]",
        );
        assert!(EngineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = EngineConfig::from_toml(MINIMAL).unwrap();
        let again = EngineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn validation_diagnostics_name_the_field() {
        let no_tasks = "[reward]\ntarget_latency_s = 0.025\n";
        let err = toml::from_str::<EngineConfig>(no_tasks);
        assert!(err.is_err()); // `task` is mandatory at parse level

        let bad_reward = MINIMAL.replace("target_latency_s = 0.025", "target_latency_s = -1.0");
        match EngineConfig::from_toml(&bad_reward) {
            Err(ConfigError::Invalid { field: "reward", .. }) => {}
            other => panic!("expected reward diagnostic, got {other:?}"),
        }

        let bad_tournament = format!(
            "{MINIMAL}\n[evolution]\npopulation_size = 4\ntournament_size = 9\n"
        );
        match EngineConfig::from_toml(&bad_tournament) {
            Err(ConfigError::Invalid { field: "evolution", .. }) => {}
            other => panic!("expected evolution diagnostic, got {other:?}"),
        }

        let bad_resolution = format!("input_resolution = [0, 256]\n{MINIMAL}");
        match EngineConfig::from_toml(&bad_resolution) {
            Err(ConfigError::Invalid { field: "input_resolution", .. }) => {}
            other => panic!("expected resolution diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn lookup_evaluator_requires_existing_file() {
        let cfg = format!(
            "{MINIMAL}\n[evaluator]\nkind = \"lookup\"\npath = \"/nonexistent/table.csv\"\n"
        );
        match EngineConfig::from_toml(&cfg) {
            Err(ConfigError::MissingFile { field: "evaluator.path", .. }) => {}
            other => panic!("expected missing-file diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn load_applies_env_overrides_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("table.csv");
        std::fs::write(&table, "genome_key,task,metric,value\n").unwrap();
        let config_path = dir.path().join("engine.toml");
        let text = format!(
            "{MINIMAL}\n[evaluator]\nkind = \"lookup\"\npath = \"table.csv\"\n"
        );
        std::fs::write(&config_path, text).unwrap();

        std::env::set_var("EDGESEARCH_OUTPUT_DIR", "/tmp/override-out");
        std::env::set_var("EDGESEARCH_SEED", "12345");
        let cfg = EngineConfig::load(&config_path).unwrap();
        std::env::remove_var("EDGESEARCH_OUTPUT_DIR");
        std::env::remove_var("EDGESEARCH_SEED");

        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/override-out"));
        assert_eq!(cfg.evolution.seed, 12345);
        match &cfg.evaluator {
            EvaluatorConfig::Lookup { path } => assert_eq!(path, &table),
            other => panic!("expected lookup evaluator, got {other:?}"),
        }
    }
}
