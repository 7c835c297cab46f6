//! Zone-level discrete-event simulator: arrivals, batched routing, and the
//! per-epoch pricing and relocation decisions of a policy.

mod episode;
mod metrics;
mod policy;
mod router;
mod state;

pub use episode::{forecast_demand, run_episode, EpisodeOptions, EpisodeOutcome};
pub use metrics::{read_metrics, write_metrics, write_trace, EpochTrace, Metrics, METRICS_SCHEMA_VERSION};
pub use policy::{Policy, PolicyKind, ZoneMerge};
pub use router::{solve_batch, solve_single_assignment, Assignment, BatchRequest, Route, RouterBatch, RouterSettings, ZoneTimes};
pub use state::{retained, InvariantViolation, OpenRequest, RelocationViolation, SimState, Vehicle, VehicleTask};

use thiserror::Error;

use crate::demand::DemandError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error("policy failed: {0}")]
    Policy(String),
    #[error("relocation plan rejected in epoch {epoch}: {violations:?}")]
    Relocation { epoch: usize, violations: Vec<RelocationViolation> },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
