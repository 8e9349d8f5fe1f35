use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, GaitThresholds};
use crate::physics::{MaterialSettings, SimParams, StiffnessRegime};

pub const SCHEMA_VERSION: u32 = 1;

/// One JSON document describing a batch of evolution runs.
///
/// Every section and key is optional except `schema_version`; missing values
/// take the defaults of the corresponding Rust types. Unknown keys are
/// rejected. The `evolution` section has no regime or seed: those come from
/// `regimes` and `seed_list`.
///
/// Runs are laid out regime by regime: `regimes[0]` gets seeds
/// `seed_list[0 .. run_count]`, `regimes[1]` the next `run_count`, and so on.
/// An empty `seed_list` means seeds `1, 2, 3, ...` in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub material: MaterialSettings,
    #[serde(default)]
    pub evolution: EvolutionSettings,
    #[serde(default)]
    pub gait: GaitThresholds,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<StiffnessRegime>,
    #[serde(default = "default_run_count")]
    pub run_count: usize,
    #[serde(default)]
    pub seed_list: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_directory: PathBuf,
    /// Parallel workers; 0 picks one per CPU.
    #[serde(default)]
    pub workers: usize,
}

/// GA parameters shared by every run of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSettings {
    pub population_size: usize,
    pub generations: usize,
    pub replacement_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate_per_bit: f64,
    pub sim_duration: f64,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        let c = EvolutionConfig::default();
        Self {
            population_size: c.population_size,
            generations: c.generations,
            replacement_fraction: c.replacement_fraction,
            crossover_rate: c.crossover_rate,
            mutation_rate_per_bit: c.mutation_rate_per_bit,
            sim_duration: c.sim_duration,
        }
    }
}

impl EvolutionSettings {
    pub fn for_run(&self, regime: StiffnessRegime, seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            population_size: self.population_size,
            generations: self.generations,
            replacement_fraction: self.replacement_fraction,
            crossover_rate: self.crossover_rate,
            mutation_rate_per_bit: self.mutation_rate_per_bit,
            sim_duration: self.sim_duration,
            stiffness_regime: regime,
            master_seed: seed,
        }
    }
}

fn default_regimes() -> Vec<StiffnessRegime> {
    vec![StiffnessRegime::High, StiffnessRegime::Low]
}

fn default_run_count() -> usize {
    5
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sim: SimParams::default(),
            material: MaterialSettings::default(),
            evolution: EvolutionSettings::default(),
            gait: GaitThresholds::default(),
            regimes: default_regimes(),
            run_count: default_run_count(),
            seed_list: Vec::new(),
            output_directory: default_output(),
            workers: 0,
        }
    }
}

/// One scheduled evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub regime: StiffnessRegime,
    pub seed: u64,
}

impl RunSpec {
    pub fn directory_name(&self) -> String {
        format!("{}_seed{}", self.regime, self.seed)
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses and validates. Errors name the offending line where possible.
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate().map_err(|(key, msg)| match line_of(text, key) {
            Some(line) => Error::Config(format!("{msg} at line {line}")),
            None => Error::Config(msg),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks value ranges; on failure returns the key to blame.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err((
                "schema_version",
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.sim.validate().map_err(|e| ("sim", e.to_string()))?;
        self.material.validate().map_err(|e| ("material", e.to_string()))?;
        self.evolution
            .for_run(StiffnessRegime::Low, 0)
            .validate()
            .map_err(|e| ("evolution", e.to_string()))?;
        if self.regimes.is_empty() && self.run_count > 0 {
            return Err(("regimes", "at least one regime is required".into()));
        }
        let total = self.regimes.len() * self.run_count;
        if !self.seed_list.is_empty() && self.seed_list.len() != total {
            return Err((
                "seed_list",
                format!(
                    "seed_list has {} seeds but {} regimes x {} runs need {total}",
                    self.seed_list.len(),
                    self.regimes.len(),
                    self.run_count
                ),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for run in self.runs() {
            if !seen.insert(run.directory_name()) {
                return Err(("seed_list", format!("run {} appears twice", run.directory_name())));
            }
        }
        Ok(())
    }

    pub fn runs(&self) -> Vec<RunSpec> {
        let mut runs = Vec::with_capacity(self.regimes.len() * self.run_count);
        for (r, &regime) in self.regimes.iter().enumerate() {
            for i in 0..self.run_count {
                let k = r * self.run_count + i;
                let seed = self.seed_list.get(k).copied().unwrap_or(k as u64 + 1);
                runs.push(RunSpec { regime, seed });
            }
        }
        runs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.evolution.population_size, 50);
        assert_eq!(c.evolution.generations, 200);
        assert_eq!(c.sim.timestep, 5e-4);
        assert_eq!(c.runs().len(), 10);
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig {
            seed_list: (100..110).collect(),
            output_directory: "out/x".into(),
            ..ExperimentConfig::default()
        };
        c.evolution.sim_duration = 5.0;
        c.sim.settle_duration = 3.0;
        assert_eq!(ExperimentConfig::parse(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected_with_line() {
        let text = "{\n  \"schema_version\": 1,\n  \"sim\": {\n    \"timestepp\": 0.001\n  }\n}";
        let err = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("timestepp") && err.contains("line 4"), "{err}");
    }

    #[test]
    fn regime_and_seed_cannot_sit_in_evolution_section() {
        let text = r#"{"schema_version": 1, "evolution": {"master_seed": 3}}"#;
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn semantic_errors_point_at_key() {
        let text = "{\n  \"schema_version\": 1,\n  \"run_count\": 2,\n  \"seed_list\": [1, 2, 3]\n}";
        let err = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let text = "{\n  \"schema_version\": 1,\n  \"evolution\": {\"population_size\": 1}\n}";
        let err = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("population_size"), "{err}");
        assert!(ExperimentConfig::parse(r#"{"schema_version": 2}"#).is_err());
    }

    #[test]
    fn run_layout() {
        let c = ExperimentConfig {
            run_count: 2,
            seed_list: vec![7, 8, 9, 10],
            ..ExperimentConfig::default()
        };
        let runs: Vec<String> = c.runs().iter().map(RunSpec::directory_name).collect();
        assert_eq!(runs, ["HIGH_seed7", "HIGH_seed8", "LOW_seed9", "LOW_seed10"]);
    }
}
