use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::features::{pricing_input, relocation_input};
use super::learner::{Learner, Task};
use super::pricing::{predict_pricing, predict_relocation, PricingPrediction};
use super::restore::{restore_feasibility, RestoredRelocation};
use super::ProxyError;
use crate::mpc::{FirstEpochActions, MpcInstance};
use crate::rng::Stream;
use crate::transport::{solve_transport, TransportProblem};

/// Trained pricing and relocation learners applied in sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proxy {
    pub pricing: Learner,
    pub relocation: Learner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyDecision {
    pub pricing: PricingPrediction,
    pub restored: RestoredRelocation,
    pub actions: FirstEpochActions,
    pub elapsed: Duration,
}

impl Proxy {
    pub fn new(pricing: Learner, relocation: Learner) -> Result<Self, ProxyError> {
        if pricing.task != Task::Pricing || relocation.task != Task::Relocation {
            return Err(ProxyError::Settings("learners are attached to the wrong tasks".into()));
        }
        Ok(Self { pricing, relocation })
    }

    /// First-epoch multipliers and a relocation plan for `inst`.
    pub fn decide(&self, inst: &MpcInstance, rng: &mut Stream) -> Result<ProxyDecision, ProxyError> {
        let start = Instant::now();
        let pricing = predict_pricing(&self.pricing, &pricing_input(inst), &inst.multipliers)?;
        let raw = predict_relocation(&self.relocation, &relocation_input(inst, &pricing.index))?;
        let idle_now: Vec<u32> = inst.idle.column(0).to_vec();
        let restored = restore_feasibility(&raw, &idle_now, rng);
        let problem = TransportProblem::for_relocation(&restored.outbound, &restored.inbound, &inst.travel_seconds)?;
        let plan = solve_transport(&problem)?;
        let relocation = plan.without_diagonal().mapv(|v| v as u32);
        let actions = FirstEpochActions {
            multiplier_index: pricing.index.clone(),
            multipliers: pricing.multipliers.clone(),
            relocation,
        };
        Ok(ProxyDecision { pricing, restored, actions, elapsed: start.elapsed() })
    }

    pub fn save(&self, dir: &Path) -> Result<(), ProxyError> {
        std::fs::create_dir_all(dir)?;
        self.pricing.save(&dir.join("pricing.json"))?;
        self.relocation.save(&dir.join("relocation.json"))
    }

    pub fn load(dir: &Path) -> Result<Self, ProxyError> {
        Self::new(Learner::load(&dir.join("pricing.json"))?, Learner::load(&dir.join("relocation.json"))?)
    }
}
