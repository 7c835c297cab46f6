use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::config::ScenarioConfig;
use crate::demand::DemandPattern;
use crate::mpc::{ExactLimits, HeuristicLimits};
use crate::proxy::{LabelSolver, LearnerKind, LearnerSettings};
use crate::sim::{PolicyKind, ZoneMerge};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Generate,
    Solve,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Generate, Stage::Solve, Stage::Train, Stage::Evaluate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Solve => "solve",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Half-open `start..end`, written as that string in plans and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(self) -> impl Iterator<Item = u64> {
        self.start..self.end
    }

    pub fn len(self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(self) -> bool {
        self.end == self.start
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("seed range {s:?} is not start..end"))?;
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("seed range {s:?}: {e}"));
        let (start, end) = (parse(a)?, parse(b)?);
        if end < start {
            return Err(format!("seed range {s:?} ends before it starts"));
        }
        Ok(Self { start, end })
    }
}

impl TryFrom<String> for SeedRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> String {
        format!("{}..{}", r.start, r.end)
    }
}

/// A named profile with default parameters, or a fully spelled-out pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Named(String),
    Explicit(DemandPattern),
}

impl PatternSpec {
    pub fn resolve(&self, cfg: &ScenarioConfig) -> Result<DemandPattern, HarnessError> {
        let pattern = match self {
            PatternSpec::Named(name) => DemandPattern::from_name(name, cfg).map_err(|e| HarnessError::Plan(e.to_string()))?,
            PatternSpec::Explicit(p) => p.clone(),
        };
        pattern.validate(cfg.zone_count).map_err(|e| HarnessError::Plan(e.to_string()))?;
        Ok(pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Directory name under the plan's output directory.
    pub name: String,
    pub pattern: PatternSpec,
    /// Streams that feed the training set.
    #[serde(default = "empty_range")]
    pub train_seeds: SeedRange,
    /// Streams every policy is evaluated on.
    pub eval_seeds: SeedRange,
    #[serde(default)]
    pub config: ScenarioConfig,
}

fn empty_range() -> SeedRange {
    SeedRange { start: 0, end: 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub exact_nodes: u64,
    pub heuristic_evaluations: usize,
    /// Solver used for training labels.
    pub label_with: SolverChoice,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { exact_nodes: 200_000, heuristic_evaluations: 4000, label_with: SolverChoice::Heuristic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSettings {
    /// Perturbed copies written next to each base stream.
    pub perturbations: usize,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self { perturbations: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learner: LearnerKind,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub settings: LearnerSettings,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { learner: LearnerKind::ZoneShared, holdout_fraction: 0.2, seed: 7, settings: LearnerSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub allow_sharing: bool,
    pub router_node_budget: u64,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self { allow_sharing: true, router_node_budget: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// Policy the paired deltas are taken against; defaults to the first MPC policy listed.
    pub reference: Option<PolicyKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub policies: Vec<PolicyKind>,
    /// Zone-to-cluster map for the clustered MPC.
    #[serde(default)]
    pub merge_map: Option<Vec<usize>>,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub generate: GenerateSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub evaluate: EvaluateSettings,
    #[serde(default)]
    pub report: ReportSettings,
    pub scenarios: Vec<Scenario>,
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let plan: Self = toml::from_str(text).map_err(|e| HarnessError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Relative output directories resolve against the plan file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Plan(format!("{}: {e}", path.display())))?;
        let mut plan = Self::from_toml(&text)?;
        if plan.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                plan.output_dir = dir.join(&plan.output_dir);
            }
        }
        Ok(plan)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Plan(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Plan(m));
        if self.schema_version != PLAN_SCHEMA_VERSION {
            return bad(format!("unsupported plan schema_version {}", self.schema_version));
        }
        if self.scenarios.is_empty() {
            return bad("plan lists no scenarios".into());
        }
        if self.policies.is_empty() {
            return bad("plan lists no policies".into());
        }
        if !(0.0..1.0).contains(&self.train.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 1)".into());
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("scenario names must be unique".into());
        }
        for s in &self.scenarios {
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
                return bad(format!("scenario name {:?} is not a plain directory name", s.name));
            }
            s.config.validate().map_err(|e| HarnessError::Plan(format!("scenario {}: {e}", s.name)))?;
            s.pattern.resolve(&s.config).map_err(|e| HarnessError::Plan(format!("scenario {}: {e}", s.name)))?;
            if let Some(map) = &self.merge_map {
                if map.len() != s.config.zone_count {
                    return bad(format!("merge_map covers {} zones, scenario {} has {}", map.len(), s.name, s.config.zone_count));
                }
            }
        }
        if self.policies.contains(&PolicyKind::MpcClustered) {
            match &self.merge_map {
                None => return bad("mpc-clustered needs a merge_map".into()),
                Some(map) => {
                    ZoneMerge::new(map.clone()).map_err(HarnessError::Plan)?;
                }
            }
        }
        if self.policies.contains(&PolicyKind::Proxy) && self.scenarios.iter().any(|s| s.train_seeds.is_empty()) {
            return bad("the proxy policy needs train_seeds in every scenario".into());
        }
        Ok(())
    }

    pub fn exact_limits(&self, wall_clock: Option<Duration>) -> ExactLimits {
        ExactLimits { nodes: self.solver.exact_nodes, wall_clock, ..ExactLimits::default() }
    }

    pub fn heuristic_limits(&self, wall_clock: Option<Duration>) -> HeuristicLimits {
        HeuristicLimits { evaluations: self.solver.heuristic_evaluations, wall_clock }
    }

    pub fn label_solver(&self, wall_clock: Option<Duration>) -> LabelSolver {
        match self.solver.label_with {
            SolverChoice::Exact => LabelSolver::Exact(self.exact_limits(wall_clock)),
            SolverChoice::Heuristic => LabelSolver::Heuristic(self.heuristic_limits(wall_clock)),
        }
    }

    /// Policy the paired deltas are measured against.
    pub fn reference_policy(&self) -> PolicyKind {
        self.report.reference.unwrap_or_else(|| {
            self.policies
                .iter()
                .copied()
                .find(|p| matches!(p, PolicyKind::MpcExact | PolicyKind::MpcHeuristic))
                .unwrap_or(self.policies[0])
        })
    }
}
