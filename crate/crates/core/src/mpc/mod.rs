//! Pricing and relocation program: instances, solutions, a validator and two solvers.

mod exact;
mod export;
mod heuristic;
pub mod instance;
mod solution;

pub use exact::{solve_exact, ExactLimits};
pub use export::export_lp;
pub use heuristic::{solve_heuristic, HeuristicLimits};
pub use instance::{availability_epoch, build_instance, MpcInstance, ServiceGuarantee, VehicleAvailability};
pub use solution::{
    backlog, first_epoch_actions, recompute_objective, validate_solution, FirstEpochActions, MpcSolution, SolveStatus,
    Violation, ViolationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum MpcError {
    #[error("malformed instance: {0}")]
    Shape(String),
    #[error("demand covers {found} epochs but the horizon is {expected}")]
    Horizon { expected: usize, found: usize },
    #[error("dump format: {0}")]
    Format(String),
}
