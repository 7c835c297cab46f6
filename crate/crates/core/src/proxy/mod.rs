//! Learned stand-in for the MPC: features, learners, feasibility restoration
//! and the pricing-then-relocation pipeline.

mod dataset;
mod evaluate;
mod features;
mod forest;
mod learner;
mod pipeline;
mod pricing;
mod restore;

pub use dataset::{
    build_training_set, label_instance, perturb_instance, LabelSolver, TrainingRow, TrainingSet, TRAINING_SET_SCHEMA_VERSION,
};
pub use evaluate::{baseline_metrics, evaluate_learner, evaluate_predictions, majority_multiplier, LearnerMetrics};
pub use features::{
    extract_features, feature_len, first_epoch_demand, pricing_input, relocation_input, zone_feature_len, zone_features,
    FeatureVector, LearnerInput,
};
pub use forest::{Forest, ForestSettings};
pub use learner::{Learner, LearnerKind, LearnerSettings, Task, CHECKPOINT_SCHEMA_VERSION};
pub use pipeline::{Proxy, ProxyDecision};
pub use pricing::{predict_pricing, predict_relocation, round_to_multiplier, PricingPrediction};
pub use restore::{restore_feasibility, AggRelocation, RestoredRelocation};

use thiserror::Error;

use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("holdout set is empty")]
    EmptyHoldout,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Transport(#[from] TransportError),
}
