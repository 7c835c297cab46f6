use std::fmt::Write as _;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{DemandError, RequestStream};
use crate::numeric::{round_half_up, EPS};

/// Baseline zone-to-zone vehicle demand `D0[origin, dest, epoch]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandTensor {
    pub vehicles: Array3<u32>,
}

impl DemandTensor {
    pub fn zeros(zones: usize, epochs: usize) -> Self {
        Self { vehicles: Array3::zeros((zones, zones, epochs)) }
    }

    pub fn zones(&self) -> usize {
        self.vehicles.dim().0
    }

    pub fn epochs(&self) -> usize {
        self.vehicles.dim().2
    }

    /// Dense `origin,dest,epoch,vehicles` table, one row per cell.
    pub fn dump(&self) -> String {
        let mut s = String::from("origin,dest,epoch,vehicles\n");
        for ((i, j, t), v) in self.vehicles.indexed_iter() {
            let _ = writeln!(s, "{i},{j},{t},{v}");
        }
        s
    }
}

/// Row-stochastic destination shares `mu[origin, dest]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationDistribution {
    pub shares: Array2<f64>,
}

impl DestinationDistribution {
    pub fn uniform(zones: usize) -> Self {
        Self { shares: Array2::from_elem((zones, zones), 1.0 / zones as f64) }
    }

    pub fn new(shares: Array2<f64>) -> Result<Self, DemandError> {
        let d = Self { shares };
        d.validate()?;
        Ok(d)
    }

    /// Empirical destination frequencies with +1 Laplace smoothing per cell.
    pub fn from_streams<'a>(streams: impl IntoIterator<Item = &'a RequestStream>, zones: usize) -> Self {
        let mut counts = Array2::from_elem((zones, zones), 1.0);
        for s in streams {
            for r in &s.requests {
                if r.origin < zones && r.dest < zones {
                    counts[[r.origin, r.dest]] += r.riders as f64;
                }
            }
        }
        for mut row in counts.rows_mut() {
            let total: f64 = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Self { shares: counts }
    }

    /// Normalised rows of an expected-rate matrix; all-zero rows become uniform.
    pub fn from_rates(rates: &Array2<f64>) -> Self {
        let zones = rates.nrows();
        let mut shares = rates.clone();
        for mut row in shares.rows_mut() {
            let total: f64 = row.sum();
            if total > 0.0 {
                row.mapv_inplace(|v| v / total);
            } else {
                row.fill(1.0 / zones as f64);
            }
        }
        Self { shares }
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        if self.shares.nrows() != self.shares.ncols() {
            return Err(DemandError::InvalidDistribution("matrix is not square".into()));
        }
        for (i, row) in self.shares.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(DemandError::InvalidDistribution(format!("row {i} has a negative or non-finite share")));
            }
            if (row.sum() - 1.0).abs() > EPS {
                return Err(DemandError::InvalidDistribution(format!("row {i} sums to {}", row.sum())));
            }
        }
        Ok(())
    }
}

/// Zone-level vehicle demand `D[zone, epoch]`: riders per origin and epoch,
/// divided by the ride-share ratio and rounded half-up. Requests past the
/// last epoch are ignored.
pub fn aggregate_zone_demand(
    stream: &RequestStream,
    zones: usize,
    epochs: usize,
    epoch_seconds: u64,
    rideshare: f64,
) -> Array2<u32> {
    let mut riders = Array2::<u64>::zeros((zones, epochs));
    for r in &stream.requests {
        let t = (r.time_s / epoch_seconds) as usize;
        if t < epochs && r.origin < zones {
            riders[[r.origin, t]] += r.riders as u64;
        }
    }
    riders.mapv(|n| round_half_up(n as f64 / rideshare) as u32)
}

/// `D0[i, j, t] = round_half_up(D[i, t] * mu[i, j])`. Rows are not
/// renormalised, so a row may sum to slightly more or less than `D[i, t]`.
pub fn disaggregate(zone_demand: &Array2<u32>, mu: &DestinationDistribution) -> Result<DemandTensor, DemandError> {
    mu.validate()?;
    let (zones, epochs) = zone_demand.dim();
    if mu.shares.nrows() != zones {
        return Err(DemandError::Shape(format!("distribution has {} zones, demand has {zones}", mu.shares.nrows())));
    }
    let vehicles = Array3::from_shape_fn((zones, zones, epochs), |(i, j, t)| {
        round_half_up(zone_demand[[i, t]] as f64 * mu.shares[[i, j]]) as u32
    });
    Ok(DemandTensor { vehicles })
}
