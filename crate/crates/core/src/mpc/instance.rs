use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::MpcError;
use crate::config::ScenarioConfig;
use crate::demand::DemandTensor;
use crate::geometry::TravelMatrix;
use crate::numeric::round_half_up;
use crate::weights::WeightParams;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Whether requests placed early enough in the horizon must all be served.
/// `Soft` turns every service row into `<=`; it is what a relocation-only
/// controller (no pricing lever) uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceGuarantee {
    Hard,
    Soft,
}

/// Inputs of one MPC solve. Epoch indices are 0-based: index 0 is the epoch
/// being decided now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcInstance {
    pub schema_version: u32,
    pub zones: usize,
    pub horizon: usize,
    pub patience: usize,
    pub multipliers: Vec<f64>,
    /// `V[i, t]`: vehicles becoming idle in zone `i` during epoch `t`.
    pub idle: Array2<u32>,
    /// `D0[i, j, t]`.
    pub base_demand: Array3<u32>,
    /// `D[k, i, j, t] = round_half_up(gamma_k * D0[i, j, t])`.
    pub demand_options: Array4<u32>,
    pub travel_epochs: Array2<u32>,
    pub travel_seconds: Array2<f64>,
    pub rideshare: f64,
    pub weights: WeightParams,
    pub big_m: u32,
    pub service: ServiceGuarantee,
}

/// When one vehicle becomes available, relative to the decision instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleAvailability {
    pub zone: usize,
    pub seconds_until_idle: u64,
}

/// Epoch index in which a vehicle becomes idle. Only vehicles idle right now
/// count toward epoch 0, since its decisions are applied immediately; one
/// freeing up later in the current epoch is counted in the next.
pub fn availability_epoch(seconds_until_idle: u64, epoch_seconds: u64) -> usize {
    if seconds_until_idle == 0 {
        0
    } else {
        ((seconds_until_idle / epoch_seconds) as usize).max(1)
    }
}

pub fn scale_demand(base: &Array3<u32>, multipliers: &[f64]) -> Array4<u32> {
    let (z, _, t) = base.dim();
    Array4::from_shape_fn((multipliers.len(), z, z, t), |(k, i, j, e)| {
        round_half_up(multipliers[k] * base[[i, j, e]] as f64) as u32
    })
}

impl MpcInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        idle: Array2<u32>,
        base_demand: Array3<u32>,
        multipliers: Vec<f64>,
        travel: &TravelMatrix,
        patience: usize,
        rideshare: f64,
        weights: WeightParams,
        big_m: u32,
    ) -> Result<Self, MpcError> {
        let (zones, horizon) = idle.dim();
        let inst = Self {
            schema_version: INSTANCE_SCHEMA_VERSION,
            zones,
            horizon,
            patience,
            demand_options: scale_demand(&base_demand, &multipliers),
            multipliers,
            idle,
            base_demand,
            travel_epochs: travel.epochs.clone(),
            travel_seconds: travel.seconds.clone(),
            rideshare,
            weights,
            big_m,
            service: ServiceGuarantee::Hard,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn check(&self) -> Result<(), MpcError> {
        let (z, t) = (self.zones, self.horizon);
        let shape = |what: &str| Err(MpcError::Shape(what.to_string()));
        if z == 0 || t == 0 {
            return shape("instance needs at least one zone and one epoch");
        }
        if self.patience == 0 || self.patience > t {
            return shape("patience must lie in 1..=horizon");
        }
        if self.idle.dim() != (z, t) {
            return shape("idle supply must be zones x horizon");
        }
        if self.base_demand.dim() != (z, z, t) {
            return shape("base demand must be zones x zones x horizon");
        }
        if self.demand_options.dim() != (self.multipliers.len(), z, z, t) {
            return shape("demand options must be multipliers x zones x zones x horizon");
        }
        if self.travel_epochs.dim() != (z, z) || self.travel_seconds.dim() != (z, z) {
            return shape("travel matrices must be zones x zones");
        }
        if self.travel_epochs.iter().any(|&l| l == 0) {
            return shape("travel epochs must be at least one");
        }
        if self.multipliers.is_empty() {
            return shape("need at least one multiplier");
        }
        Ok(())
    }

    /// Same inputs with a different multiplier set and service rule.
    pub fn with_multipliers(&self, multipliers: Vec<f64>, service: ServiceGuarantee) -> Self {
        Self {
            demand_options: scale_demand(&self.base_demand, &multipliers),
            multipliers,
            service,
            ..self.clone()
        }
    }

    pub fn multiplier_count(&self) -> usize {
        self.multipliers.len()
    }

    /// Last pickup epoch for requests placed in `t0` (inclusive).
    pub fn window_last(&self, t0: usize) -> usize {
        (t0 + self.patience - 1).min(self.horizon - 1)
    }

    /// First request epoch whose window still contains `e`.
    pub fn window_first_origin(&self, e: usize) -> usize {
        (e + 1).saturating_sub(self.patience)
    }

    /// Requests placed in `t0` must be fully served inside the horizon.
    pub fn is_hard(&self, t0: usize) -> bool {
        self.service == ServiceGuarantee::Hard && t0 + self.patience <= self.horizon
    }

    pub fn service_weight(&self, t0: usize, rho: usize) -> f64 {
        self.weights.service(t0 + 1, rho + 1)
    }

    /// Objective gain per vehicle serving a request of `t0` at `rho`.
    pub fn service_gain(&self, i: usize, j: usize, t0: usize, rho: usize) -> f64 {
        let _ = (i, j);
        self.service_weight(t0, rho) * self.rideshare
    }

    pub fn relocation_cost(&self, i: usize, j: usize, e: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.weights.relocation(e + 1, self.travel_seconds[[i, j]])
        }
    }

    pub fn lambda(&self, i: usize, j: usize) -> usize {
        self.travel_epochs[[i, j]] as usize
    }

    pub fn total_supply(&self) -> u32 {
        self.idle.sum()
    }

    pub fn to_toml(&self) -> Result<String, MpcError> {
        toml::to_string(self).map_err(|e| MpcError::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, MpcError> {
        let inst: Self = toml::from_str(text).map_err(|e| MpcError::Format(e.to_string()))?;
        if inst.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(MpcError::Format(format!("unsupported instance schema_version {}", inst.schema_version)));
        }
        inst.check()?;
        Ok(inst)
    }
}

/// Assemble an instance from the demand forecast and the fleet's availability.
/// Vehicles that only free up beyond the horizon are left out.
pub fn build_instance(
    demand: &DemandTensor,
    fleet: &[VehicleAvailability],
    cfg: &ScenarioConfig,
    travel: &TravelMatrix,
) -> Result<MpcInstance, MpcError> {
    if demand.epochs() != cfg.horizon {
        return Err(MpcError::Horizon { expected: cfg.horizon, found: demand.epochs() });
    }
    if demand.zones() != cfg.zone_count || travel.zones() != cfg.zone_count {
        return Err(MpcError::Shape(format!(
            "config has {} zones, demand {}, travel {}",
            cfg.zone_count,
            demand.zones(),
            travel.zones()
        )));
    }
    let mut idle = Array2::zeros((cfg.zone_count, cfg.horizon));
    for v in fleet {
        if v.zone >= cfg.zone_count {
            return Err(MpcError::Shape(format!("vehicle in zone {} outside 0..{}", v.zone, cfg.zone_count)));
        }
        let e = availability_epoch(v.seconds_until_idle, cfg.epoch_seconds);
        if e < cfg.horizon {
            idle[[v.zone, e]] += 1;
        }
    }
    MpcInstance::new(
        idle,
        demand.vehicles.clone(),
        cfg.multipliers.clone(),
        travel,
        cfg.patience,
        cfg.rideshare,
        WeightParams::from_config(cfg),
        cfg.big_m(),
    )
}
