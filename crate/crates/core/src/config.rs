//! Scenario configuration shared by every stage of an experiment.
//!
//! A [`ScenarioConfig`] is persisted as a flat TOML document carrying a
//! `schema_version` key. Loading always goes through [`ScenarioConfig::validate`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario config: {0}")]
    Invalid(String),
    #[error("unsupported schema_version {found}, expected {SCHEMA_VERSION}")]
    Schema { found: u32 },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub zone_count: usize,
    /// Zones are laid out row-major on a grid with this many columns.
    pub grid_columns: usize,
    /// Centroid distance between horizontally adjacent zones, in seconds of travel.
    pub zone_spacing_seconds: f64,
    /// Time to pick up or drop off inside a zone.
    pub intra_zone_seconds: u64,
    pub epoch_seconds: u64,
    /// MPC look-ahead in epochs.
    pub horizon: usize,
    /// Epochs a rider stays in the system after requesting.
    pub patience: usize,
    pub multipliers: Vec<f64>,
    pub rideshare: f64,
    /// `a` in `q^p(t, rho) = a^t * b^(rho - t)`.
    pub service_weight_base: f64,
    /// `b` in `q^p(t, rho) = a^t * b^(rho - t)`.
    pub service_weight_decay: f64,
    pub relocation_weight_scale: f64,
    /// Zero means "use fleet_size".
    pub big_m: u32,
    pub fleet_size: usize,
    pub vehicle_capacity: u32,
    pub router_batch_seconds: u64,
    pub episode_epochs: usize,
    pub match_patience_epochs: u64,
    pub pickup_patience_epochs: u64,
    pub penalty_escalation: f64,
    pub detour_factor: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            zone_count: 6,
            grid_columns: 3,
            zone_spacing_seconds: 420.0,
            intra_zone_seconds: 120,
            epoch_seconds: 300,
            horizon: 6,
            patience: 2,
            multipliers: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            rideshare: 1.5,
            service_weight_base: 0.5,
            service_weight_decay: 0.75,
            relocation_weight_scale: 0.001,
            big_m: 0,
            fleet_size: 30,
            vehicle_capacity: 4,
            router_batch_seconds: 60,
            episode_epochs: 24,
            match_patience_epochs: 1,
            pickup_patience_epochs: 2,
            penalty_escalation: 2.0,
            detour_factor: 1.5,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema { found: self.schema_version });
        }
        if self.zone_count == 0 {
            return bad("zone_count must be positive");
        }
        if self.grid_columns == 0 {
            return bad("grid_columns must be positive");
        }
        if !self.zone_spacing_seconds.is_finite() || self.zone_spacing_seconds < 0.0 {
            return bad("zone_spacing_seconds must be finite and nonnegative");
        }
        if self.epoch_seconds == 0 || self.horizon == 0 || self.patience == 0 {
            return bad("epoch_seconds, horizon and patience must be positive");
        }
        if self.patience > self.horizon {
            return bad("patience must not exceed horizon");
        }
        if self.router_batch_seconds == 0 || !self.epoch_seconds.is_multiple_of(self.router_batch_seconds) {
            return bad("router_batch_seconds must divide epoch_seconds");
        }
        check_multipliers(&self.multipliers).map_err(ConfigError::Invalid)?;
        if !(self.rideshare.is_finite() && self.rideshare > 0.0) {
            return bad("rideshare must be positive");
        }
        for w in [self.service_weight_base, self.service_weight_decay] {
            if !(w > 0.0 && w < 1.0) {
                return bad("service weight base and decay must lie in (0, 1)");
            }
        }
        if !(self.relocation_weight_scale.is_finite() && self.relocation_weight_scale >= 0.0) {
            return bad("relocation_weight_scale must be nonnegative");
        }
        if self.fleet_size == 0 || self.vehicle_capacity == 0 {
            return bad("fleet_size and vehicle_capacity must be positive");
        }
        if self.episode_epochs == 0 {
            return bad("episode_epochs must be positive");
        }
        if self.penalty_escalation < 1.0 || self.detour_factor < 1.0 {
            return bad("penalty_escalation and detour_factor must be at least 1");
        }
        Ok(())
    }

    pub fn big_m(&self) -> u32 {
        if self.big_m == 0 {
            self.fleet_size as u32
        } else {
            self.big_m
        }
    }

    pub fn match_patience_seconds(&self) -> u64 {
        self.match_patience_epochs * self.epoch_seconds
    }

    pub fn pickup_patience_seconds(&self) -> u64 {
        self.pickup_patience_epochs * self.epoch_seconds
    }

    pub fn episode_seconds(&self) -> u64 {
        self.episode_epochs as u64 * self.epoch_seconds
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Multipliers must start at 1, end at 0 and strictly decrease.
pub fn check_multipliers(multipliers: &[f64]) -> Result<(), String> {
    if multipliers.len() < 2 {
        return Err("need at least two multipliers".into());
    }
    if multipliers.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err("multipliers must lie in [0, 1]".into());
    }
    if multipliers[0] != 1.0 || *multipliers.last().unwrap() != 0.0 {
        return Err("multipliers must begin with 1.0 and end with 0.0".into());
    }
    if multipliers.windows(2).any(|w| w[1] >= w[0]) {
        return Err("multipliers must be strictly decreasing".into());
    }
    Ok(())
}
