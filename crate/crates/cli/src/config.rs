use std::path::{Path, PathBuf};

use alslq::{DualUpdateConfig, MpcConfig, PenaltyStrategy, SlqSettings, TaskKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid config at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// One inequality-handling method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// Label used for output directories and tables; defaults to the penalty kind.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub strategy: PenaltyStrategy,
    /// Overrides the update rule paired with the penalty.
    #[serde(default)]
    pub dual: Option<DualUpdateConfig>,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.strategy.kind.name().to_string())
    }
}

/// Closed-loop settings shared by every method of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSection {
    pub mpc_rate: f64,
    pub horizon: f64,
    pub node_spacing: f64,
    pub initial_solve_iters: usize,
    pub plant_step: f64,
    pub sim_duration: f64,
    pub initial_multiplier: f64,
    pub solver: SlqSettings,
    pub max_consecutive_failures: usize,
}

impl Default for MpcSection {
    fn default() -> Self {
        let d = MpcConfig::default();
        MpcSection {
            mpc_rate: d.mpc_rate,
            horizon: d.horizon,
            node_spacing: d.node_spacing,
            initial_solve_iters: d.initial_solve_iters,
            plant_step: d.plant_step,
            sim_duration: d.sim_duration,
            initial_multiplier: d.initial_multiplier,
            solver: d.solver,
            max_consecutive_failures: d.max_consecutive_failures,
        }
    }
}

impl MpcSection {
    pub fn with_method(&self, method: &MethodSpec) -> MpcConfig {
        MpcConfig {
            mpc_rate: self.mpc_rate,
            horizon: self.horizon,
            node_spacing: self.node_spacing,
            initial_solve_iters: self.initial_solve_iters,
            plant_step: self.plant_step,
            sim_duration: self.sim_duration,
            strategy: method.strategy,
            dual: method.dual,
            initial_multiplier: self.initial_multiplier,
            solver: self.solver,
            max_consecutive_failures: self.max_consecutive_failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub task: TaskKind,
    /// Input bound for the cart-pole task, in newtons.
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    /// Half-width of the uniform perturbation drawn for the initial state.
    #[serde(default)]
    pub x0_noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Option<MethodSpec>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub mpc: MpcSection,
    /// Largest applied constraint violation still counted as success.
    #[serde(default = "default_violation_tolerance")]
    pub violation_tolerance: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_u_max() -> f64 {
    5.0
}

fn default_violation_tolerance() -> f64 {
    0.05
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("alslq-out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if cfg.version != SCHEMA_VERSION {
            return Err(ConfigError::Schema {
                path: path.to_path_buf(),
                field: "version".into(),
                message: format!("unsupported schema version {}, expected {SCHEMA_VERSION}", cfg.version),
            });
        }
        Ok(cfg)
    }

    /// Methods in run order: `method` first, then `methods`.
    pub fn all_methods(&self) -> Vec<MethodSpec> {
        self.method.iter().chain(&self.methods).cloned().collect()
    }

    pub fn validate(&self, min_methods: usize) -> Result<(), ConfigError> {
        let methods = self.all_methods();
        if methods.len() < min_methods {
            return Err(ConfigError::Invalid(format!(
                "need at least {min_methods} method(s), the config lists {}",
                methods.len()
            )));
        }
        let mut labels: Vec<String> = methods.iter().map(MethodSpec::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != methods.len() {
            return Err(ConfigError::Invalid("method labels must be unique".into()));
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "u_max must be positive, got {}",
                self.u_max
            )));
        }
        if !(self.x0_noise >= 0.0 && self.x0_noise.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "x0_noise must be non-negative, got {}",
                self.x0_noise
            )));
        }
        if !(self.violation_tolerance >= 0.0) {
            return Err(ConfigError::Invalid("violation_tolerance must be non-negative".into()));
        }
        for m in &methods {
            self.mpc
                .with_method(m)
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("method `{}`: {e}", m.label())))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out `output_dir`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let json = value.to_string();
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
