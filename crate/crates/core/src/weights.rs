//! Time-dependent service weights and relocation penalties.
//!
//! Epochs in this module are 1-based, matching how the horizon is usually
//! written down: epoch 1 is the epoch being decided now.

use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::geometry::TravelMatrix;

#[derive(Debug, Error, PartialEq)]
#[error("pickup epoch {rho} is outside the service window of request epoch {t} (horizon {horizon}, patience {patience})")]
pub struct WindowError {
    pub t: usize,
    pub rho: usize,
    pub horizon: usize,
    pub patience: usize,
}

/// Parameters of the two weight families, copied out of a config.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightParams {
    pub service_base: f64,
    pub service_decay: f64,
    pub relocation_scale: f64,
}

impl WeightParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            service_base: cfg.service_weight_base,
            service_decay: cfg.service_weight_decay,
            relocation_scale: cfg.relocation_weight_scale,
        }
    }

    /// `a^t * b^(rho - t)` without window checks.
    pub fn service(&self, t: usize, rho: usize) -> f64 {
        debug_assert!(t >= 1 && rho >= t);
        self.service_base.powi(t as i32) * self.service_decay.powi((rho - t) as i32)
    }

    /// `c_r * a^t * eta`.
    pub fn relocation(&self, t: usize, seconds: f64) -> f64 {
        self.relocation_scale * self.service_base.powi(t as i32) * seconds
    }
}

/// Last valid pickup epoch for a request placed in `t` (1-based, inclusive).
pub fn window_end(t: usize, horizon: usize, patience: usize) -> usize {
    (t + patience - 1).min(horizon)
}

/// The pickup window `{rho : t <= rho <= t + s - 1} ∩ [1, T]`.
pub fn service_window(t: usize, horizon: usize, patience: usize) -> std::ops::RangeInclusive<usize> {
    t..=window_end(t, horizon, patience)
}

pub fn weight_qp(t: usize, rho: usize, cfg: &ScenarioConfig) -> Result<f64, WindowError> {
    if t == 0 || t > cfg.horizon || rho < t || rho > window_end(t, cfg.horizon, cfg.patience) {
        return Err(WindowError { t, rho, horizon: cfg.horizon, patience: cfg.patience });
    }
    Ok(WeightParams::from_config(cfg).service(t, rho))
}

pub fn weight_qr(i: usize, j: usize, t: usize, cfg: &ScenarioConfig, travel: &TravelMatrix) -> f64 {
    if i == j {
        return 0.0;
    }
    WeightParams::from_config(cfg).relocation(t, travel.seconds[[i, j]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_travel_matrix, ZoneLayout};

    fn cfg() -> ScenarioConfig {
        ScenarioConfig { horizon: 6, patience: 2, ..Default::default() }
    }

    #[test]
    fn service_weight_values() {
        let c = cfg();
        assert!((weight_qp(1, 1, &c).unwrap() - 0.5).abs() < 1e-12);
        assert!((weight_qp(1, 2, &c).unwrap() - 0.375).abs() < 1e-12);
        assert!((weight_qp(2, 2, &c).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn service_weight_outside_window() {
        let c = cfg();
        assert!(weight_qp(1, 3, &c).is_err());
        assert!(weight_qp(2, 1, &c).is_err());
        assert!(weight_qp(0, 0, &c).is_err());
        assert!(weight_qp(6, 7, &c).is_err());
    }

    #[test]
    fn relocation_weight_values() {
        let c = cfg();
        let travel = build_travel_matrix(&ZoneLayout::Coordinates(vec![[0.0, 0.0], [600.0, 0.0]]), 300).unwrap();
        assert_eq!(weight_qr(0, 0, 1, &c, &travel), 0.0);
        assert!((weight_qr(0, 1, 1, &c, &travel) - 0.3).abs() < 1e-12);
        assert!((weight_qr(0, 1, 2, &c, &travel) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn window_sizes() {
        for horizon in 1..8 {
            for patience in 1..=horizon {
                for t in 1..=horizon {
                    assert_eq!(service_window(t, horizon, patience).count(), patience.min(horizon - t + 1));
                }
            }
        }
    }

    #[test]
    fn earlier_service_weighs_more() {
        let c = ScenarioConfig { horizon: 8, patience: 4, ..Default::default() };
        for t in 1..=8 {
            for rho in service_window(t, 8, 4) {
                let w = weight_qp(t, rho, &c).unwrap();
                if let Ok(next) = weight_qp(t, rho + 1, &c) {
                    assert!(w > next);
                }
                if let Ok(later) = weight_qp(t + 1, rho + 1, &c) {
                    assert!(w > later);
                }
            }
        }
    }
}
