//! Experiment harness: the stages behind the `ridehail` command line.
//!
//! A run directory looks like this:
//!
//! ```text
//! <output_dir>/run.toml                  effective plan, seeds, code version
//! <output_dir>/report.csv, paired.csv    summary tables
//! <output_dir>/<scenario>/config.toml    exact scenario config
//! <output_dir>/<scenario>/manifest.csv   one row per stream file
//! <output_dir>/<scenario>/streams/       base and perturbed request streams
//! <output_dir>/<scenario>/training_set.json
//! <output_dir>/<scenario>/mip/           LP exports (with --export-mip)
//! <output_dir>/<scenario>/proxy/         learner checkpoints
//! <output_dir>/<scenario>/validation.csv
//! <output_dir>/<scenario>/metrics.csv    one row per (policy, seed)
//! ```
//!
//! Every stage leaves a `<stage>.done` stamp holding a fingerprint of the
//! effective plan and the flags that affect the stage. Re-running a stage
//! whose stamp matches does nothing unless forced.

mod plan;
mod report;
mod stages;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use plan::{
    EvaluateSettings, ExperimentPlan, GenerateSettings, PatternSpec, ReportSettings, Scenario, SeedRange, SolverChoice,
    SolverSettings, Stage, TrainSettings, PLAN_SCHEMA_VERSION,
};
pub use report::{confidence_interval, paired_deltas, summarize, PairedRow, SummaryRow, REPORT_METRICS};
pub use stages::{ManifestRow, ValidationRow};

use crate::demand::DemandError;
use crate::proxy::ProxyError;
use crate::sim::SimError;

pub const CODE_VERSION: &str = concat!("ridehail ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("plan error: {0}")]
    Plan(String),
    #[error("missing artifact {}: run the {stage} stage first", path.display())]
    Missing { path: PathBuf, stage: Stage },
    #[error("artifact {} is empty: the {stage} stage produced nothing", path.display())]
    Empty { path: PathBuf, stage: Stage },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    /// 2 for plan errors, 3 when an earlier stage's output is missing, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Plan(_) => 2,
            HarnessError::Missing { .. } | HarnessError::Empty { .. } => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Re-run stages even when their stamp matches.
    pub force: bool,
    /// Write every solved instance as an LP file during the solve stage.
    pub export_mip: bool,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Replaces every scenario's evaluation seeds.
    pub seed_range: Option<SeedRange>,
    /// Wall-clock cap per solver call. Results then depend on the machine.
    pub wall_clock: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    /// Scenario name, or `None` for the report.
    pub scenario: Option<String>,
    pub skipped: bool,
    pub detail: String,
}

/// Written to `run.toml` on every invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStamp {
    pub code_version: String,
    pub fingerprint: String,
    pub export_mip: bool,
    pub wall_clock_s: Option<f64>,
    pub plan: ExperimentPlan,
}

impl RunStamp {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join("run.toml");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        toml::from_str(&text).map_err(|e| HarnessError::Other(format!("{}: {e}", path.display())))
    }
}

/// The plan with command-line overrides applied.
pub fn effective_plan(plan: &ExperimentPlan, opts: &RunOptions) -> ExperimentPlan {
    let mut plan = plan.clone();
    if let Some(range) = opts.seed_range {
        for s in &mut plan.scenarios {
            s.eval_seeds = range;
        }
    }
    plan
}

/// Hash of everything a stage's output depends on; `None` stands for the whole run.
pub(crate) fn fingerprint(plan: &ExperimentPlan, opts: &RunOptions, stage: Option<Stage>) -> Result<String, HarnessError> {
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update(plan.to_toml()?.as_bytes());
    h.update(format!("{:?}", opts.wall_clock).as_bytes());
    if let Some(stage) = stage {
        h.update(stage.name().as_bytes());
    }
    if stage.is_none_or(|s| s == Stage::Solve) {
        h.update([opts.export_mip as u8]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Run `stages` (in pipeline order) for every scenario of `plan`.
pub fn run_stages(plan: &ExperimentPlan, stages: &[Stage], opts: &RunOptions) -> Result<Vec<StageOutcome>, HarnessError> {
    let plan = effective_plan(plan, opts);
    plan.validate()?;
    let mut stages = stages.to_vec();
    stages.sort_unstable();
    stages.dedup();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.jobs {
            b = b.num_threads(n.max(1));
        }
        b.build().map_err(|e| HarnessError::Other(e.to_string()))?
    };
    let ctx = stages::Context::new(&plan, opts)?;
    ctx.write_run_stamp()?;
    pool.install(|| {
        let mut out = Vec::new();
        for &stage in &stages {
            out.extend(ctx.run(stage)?);
        }
        Ok(out)
    })
}
