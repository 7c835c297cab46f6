//! Synthetic demand, zone-level aggregation and forecasting, and the
//! zone-to-zone baseline demand the MPC consumes.

mod aggregate;
mod forecast;
mod generate;
mod stream;

pub use aggregate::{aggregate_zone_demand, disaggregate, DemandTensor, DestinationDistribution};
pub use forecast::{daily_counts, smape, train_forecaster, ForecastModel, ForecastSettings, DAYS_PER_WEEK};
pub use generate::{central_zone, draw_perturbation_pct, generate_scenario_demand, perturb_stream, DemandPattern};
pub use stream::{Request, RequestStream};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("unknown demand profile: {0}")]
    UnknownProfile(String),
    #[error("invalid demand pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid request stream: {0}")]
    InvalidStream(String),
    #[error("invalid destination distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("insufficient history: {days} days given, {needed} needed")]
    InsufficientHistory { days: usize, needed: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
