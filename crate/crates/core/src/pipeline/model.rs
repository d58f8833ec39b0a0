//! The persisted ensemble: one additive model per (method, level) plus the
//! searched thresholds.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::combiner::{default_grid, Mode, ThresholdResult};
use crate::error::{Error, Result};
use crate::features::registry_hash;
use crate::gam::{GamConfig, GamModel};
use crate::generator::Counts;
use crate::methods::MethodId;
use crate::series::Frequency;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub levels: Vec<f64>,
    pub grid: Vec<f64>,
    pub gam: GamConfig,
    /// Level whose thresholds are applied at every level when forecasting;
    /// when absent from `levels` each level uses its own search.
    pub threshold_level: f64,
    /// Training aborts when a larger share of one frequency's series fails.
    pub max_failure_rate: f64,
    /// Echo of the generating seed, when known.
    pub seed: Option<u64>,
    pub counts: Option<Counts>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            levels: vec![0.8, 0.95],
            grid: default_grid(),
            gam: GamConfig::default(),
            threshold_level: 0.95,
            max_failure_rate: 0.2,
            seed: None,
            counts: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Config("levels must be nonempty and inside (0, 1)".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("threshold grid must be a nonempty subset of [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config("failure rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodModel {
    pub method: MethodId,
    pub level: f64,
    pub model: GamModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub format_version: u32,
    pub registry_hash: String,
    pub methods: Vec<MethodId>,
    pub levels: Vec<f64>,
    pub models: Vec<MethodModel>,
    /// One search per level.
    pub thresholds: Vec<ThresholdResult>,
    pub config: TrainConfig,
}

impl TrainedEnsemble {
    pub fn model(&self, method: MethodId, level: f64) -> Option<&GamModel> {
        self.models
            .iter()
            .find(|m| m.method == method && m.level == level)
            .map(|m| &m.model)
    }

    /// Pool members that have a model at `level` for a series of period `m`.
    pub fn pool(&self, period: usize, level: f64) -> Vec<MethodId> {
        MethodId::active_pool(period)
            .into_iter()
            .filter(|m| self.model(*m, level).is_some())
            .collect()
    }

    /// Threshold ratio applied for a frequency, mode and level.
    pub fn threshold(&self, frequency: Frequency, mode: Mode, level: f64) -> Result<f64> {
        let Some(search_mode) = mode.search_mode() else {
            return Ok(0.0);
        };
        let pick = |l: f64| self.thresholds.iter().find(|t| t.level == l);
        let result = pick(self.config.threshold_level)
            .or_else(|| pick(level))
            .ok_or_else(|| Error::Config(format!("no threshold search for level {level}")))?;
        result
            .threshold(frequency, search_mode)
            .ok_or_else(|| Error::Config(format!("no {frequency} threshold in the ensemble")))
    }

    /// Checks internal consistency and the feature registry of this build.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model format {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let current = registry_hash();
        if self.registry_hash != current {
            return Err(Error::RegistryMismatch {
                expected: self.registry_hash.clone(),
                found: current,
            });
        }
        for m in &self.models {
            if !self.methods.contains(&m.method) || !self.levels.contains(&m.level) {
                return Err(Error::Config(format!("model {} is outside the registry", m.model.label)));
            }
            if m.model.registry_hash != self.registry_hash {
                return Err(Error::RegistryMismatch {
                    expected: self.registry_hash.clone(),
                    found: m.model.registry_hash.clone(),
                });
            }
            m.model.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ensemble: TrainedEnsemble = serde_json::from_str(text)?;
        ensemble.validate()?;
        Ok(ensemble)
    }

    pub fn save(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}
