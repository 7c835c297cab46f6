//! Zone layout and travel times between zone centroids.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("zone layout is empty")]
    Empty,
    #[error("zone {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("epoch length must be positive")]
    ZeroEpoch,
}

/// Where zone centroids sit. Coordinates are expressed in seconds of travel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZoneLayout {
    Grid { zones: usize, columns: usize, spacing_seconds: f64 },
    Coordinates(Vec<[f64; 2]>),
}

impl ZoneLayout {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ZoneLayout::Grid {
            zones: cfg.zone_count,
            columns: cfg.grid_columns,
            spacing_seconds: cfg.zone_spacing_seconds,
        }
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        match self {
            ZoneLayout::Grid { zones, columns, spacing_seconds } => (0..*zones)
                .map(|z| {
                    let cols = (*columns).max(1);
                    [(z % cols) as f64 * spacing_seconds, (z / cols) as f64 * spacing_seconds]
                })
                .collect(),
            ZoneLayout::Coordinates(c) => c.clone(),
        }
    }
}

/// `seconds[i][j]` is the centroid travel time; `epochs[i][j]` the number of
/// epochs the trip occupies (at least one, one on the diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelMatrix {
    pub seconds: Array2<f64>,
    pub epochs: Array2<u32>,
}

impl TravelMatrix {
    pub fn zones(&self) -> usize {
        self.seconds.nrows()
    }

    pub fn max_off_diagonal_seconds(&self) -> f64 {
        let n = self.zones();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.seconds[[i, j]]);
                }
            }
        }
        best
    }
}

pub fn epochs_for(seconds: f64, epoch_seconds: u64) -> u32 {
    // 1e-9 slack keeps exact multiples from rounding up on float noise.
    let raw = (seconds / epoch_seconds as f64 - 1e-9).ceil();
    (raw.max(1.0)) as u32
}

pub fn build_travel_matrix(layout: &ZoneLayout, epoch_seconds: u64) -> Result<TravelMatrix, GeometryError> {
    if epoch_seconds == 0 {
        return Err(GeometryError::ZeroEpoch);
    }
    let points = layout.centroids();
    if points.is_empty() {
        return Err(GeometryError::Empty);
    }
    if let Some(bad) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(GeometryError::NonFinite(bad));
    }
    let n = points.len();
    let mut seconds = Array2::zeros((n, n));
    let mut epochs = Array2::ones((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let d = dx.hypot(dy);
            seconds[[i, j]] = d;
            epochs[[i, j]] = epochs_for(d, epoch_seconds);
        }
    }
    Ok(TravelMatrix { seconds, epochs })
}

pub fn travel_for_config(cfg: &ScenarioConfig) -> Result<TravelMatrix, GeometryError> {
    build_travel_matrix(&ZoneLayout::from_config(cfg), cfg.epoch_seconds)
}
