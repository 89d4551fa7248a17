//! Scenario files: region, radio and cost parameters, input data paths and
//! per-stage configuration blocks.

use crate::agent::AgentConfig;
use crate::geodata::{DemandConfig, Region, SiteConfig};
use crate::optimizer::OptimizerConfig;
use crate::propagation::{watts_to_dbm, RadioConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("invalid scenario value: {0}")]
    Invalid(String),
}

fn default_frequency() -> f64 {
    5e9
}
fn default_bandwidth() -> f64 {
    10e6
}
fn default_tx_power() -> f64 {
    20.0
}
fn default_cost_hap() -> f64 {
    1200.0
}
fn default_cost_tbs() -> f64 {
    600.0
}
fn default_min_rate() -> f64 {
    2e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub region: Region,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_w: f64,
    #[serde(default = "default_cost_hap")]
    pub cost_hap: f64,
    #[serde(default = "default_cost_tbs")]
    pub cost_tbs: f64,
    #[serde(default = "default_min_rate")]
    pub min_rate_bps: f64,
    #[serde(default)]
    pub budget_units: Option<f64>,
    pub population_path: PathBuf,
    pub terrain_path: PathBuf,
    #[serde(default)]
    pub towers_path: Option<PathBuf>,
    #[serde(default)]
    pub sites: SiteConfig,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl Scenario {
    /// Reads a scenario, resolving data paths relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        s.resolve_paths(base);
        s.validate()?;
        Ok(s)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.population_path);
        fix(&mut self.terrain_path);
        if let Some(t) = self.towers_path.as_mut() {
            fix(t);
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.region
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for (v, name) in [
            (self.frequency_hz, "frequency_hz"),
            (self.bandwidth_hz, "bandwidth_hz"),
            (self.tx_power_w, "tx_power_w"),
            (self.min_rate_bps, "min_rate_bps"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::Invalid(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        for (v, name) in [(self.cost_hap, "cost_hap"), (self.cost_tbs, "cost_tbs")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScenarioError::Invalid(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if let Some(b) = self.budget_units {
            if !(b >= 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "budget_units must be >= 0, got {b}"
                )));
            }
        }
        if self.agent.max_steps == 0 {
            return Err(ScenarioError::Invalid(
                "agent.max_steps must be >= 1".into(),
            ));
        }
        let files = [
            Some(&self.population_path),
            Some(&self.terrain_path),
            self.towers_path.as_ref(),
        ];
        for p in files.into_iter().flatten() {
            if !p.exists() {
                return Err(ScenarioError::MissingFile(p.clone()));
            }
        }
        self.radio_config()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.site_config()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }

    fn tx_power_dbm(&self) -> f64 {
        watts_to_dbm(self.tx_power_w).unwrap_or(f64::NAN)
    }

    /// Radio block with the top-level frequency, bandwidth and power applied.
    pub fn radio_config(&self) -> RadioConfig {
        RadioConfig {
            frequency_hz: self.frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            tx_power_dbm: self.tx_power_dbm(),
            ..self.radio
        }
    }

    /// Site block with the top-level unit costs and power applied.
    pub fn site_config(&self) -> SiteConfig {
        SiteConfig {
            cost_hap: self.cost_hap,
            cost_tbs: self.cost_tbs,
            tx_power_dbm: self.tx_power_dbm(),
            ..self.sites
        }
    }

    /// Demand block with the top-level rate floor applied per user.
    pub fn demand_config(&self) -> DemandConfig {
        DemandConfig {
            per_user_rate_bps: self.min_rate_bps,
            ..self.demand
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            budget_units: self.budget_units,
            ..self.optimizer
        }
    }
}
