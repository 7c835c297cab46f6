use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, Scenario, SolverChoice, Stage};
use super::report::{paired_deltas, summarize};
use super::{fingerprint, io_err, HarnessError, RunOptions, RunStamp, StageOutcome, CODE_VERSION};
use crate::demand::{draw_perturbation_pct, generate_scenario_demand, perturb_stream, DemandPattern, RequestStream};
use crate::mpc::{export_lp, MpcInstance};
use crate::proxy::{
    baseline_metrics, evaluate_learner, label_instance, Learner, LearnerMetrics, Proxy, Task, TrainingSet,
};
use crate::rng::{self, Rng};
use crate::sim::{read_metrics, run_episode, write_metrics, EpisodeOptions, Metrics, Policy, PolicyKind, ZoneMerge};

/// One stream file written by the generate stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// Path relative to the scenario directory.
    pub file: String,
    pub seed: u64,
    /// 0 for the base stream.
    pub variant: usize,
    /// Percentage of requests added (positive) or deleted (negative).
    pub pct: f64,
    pub requests: usize,
}

/// One line of the learner validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub task: String,
    pub model: String,
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub mse: f64,
    pub zero_one: Option<f64>,
}

pub(super) struct Context<'a> {
    plan: &'a ExperimentPlan,
    opts: &'a RunOptions,
    fingerprint: String,
}

struct ScenarioDir<'a> {
    scenario: &'a Scenario,
    pattern: DemandPattern,
    dir: PathBuf,
}

impl ScenarioDir<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn require(&self, rel: &str, stage: Stage) -> Result<PathBuf, HarnessError> {
        let path = self.path(rel);
        if path.exists() {
            Ok(path)
        } else {
            Err(HarnessError::Missing { path, stage })
        }
    }

    fn manifest(&self) -> Result<Vec<ManifestRow>, HarnessError> {
        let path = self.require("manifest.csv", Stage::Generate)?;
        let mut rows = Vec::new();
        for row in csv::Reader::from_path(&path)?.deserialize() {
            rows.push(row?);
        }
        Ok(rows)
    }

    fn stream(&self, row: &ManifestRow) -> Result<RequestStream, HarnessError> {
        let path = self.require(&row.file, Stage::Generate)?;
        Ok(RequestStream::load(&path)?)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

fn mkdir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn stream_file(seed: u64, variant: usize) -> String {
    if variant == 0 {
        format!("streams/seed-{seed}.csv")
    } else {
        format!("streams/seed-{seed}-v{variant}.csv")
    }
}

impl<'a> Context<'a> {
    pub(super) fn new(plan: &'a ExperimentPlan, opts: &'a RunOptions) -> Result<Self, HarnessError> {
        Ok(Self { plan, opts, fingerprint: fingerprint(plan, opts, None)? })
    }

    pub(super) fn write_run_stamp(&self) -> Result<(), HarnessError> {
        let out = &self.plan.output_dir;
        mkdir(out)?;
        let stamp = RunStamp {
            code_version: CODE_VERSION.to_string(),
            fingerprint: self.fingerprint.clone(),
            export_mip: self.opts.export_mip,
            wall_clock_s: self.opts.wall_clock.map(|d| d.as_secs_f64()),
            plan: self.plan.clone(),
        };
        let text = toml::to_string(&stamp).map_err(|e| HarnessError::Other(e.to_string()))?;
        let path = out.join("run.toml");
        fs::write(&path, text).map_err(io_err(&path))?;
        for s in &self.plan.scenarios {
            let dir = out.join(&s.name);
            mkdir(&dir)?;
            s.config.save(&dir.join("config.toml")).map_err(|e| HarnessError::Other(e.to_string()))?;
        }
        Ok(())
    }

    fn scenarios(&self) -> Result<Vec<ScenarioDir<'a>>, HarnessError> {
        self.plan
            .scenarios
            .iter()
            .map(|s| Ok(ScenarioDir { scenario: s, pattern: s.pattern.resolve(&s.config)?, dir: self.plan.output_dir.join(&s.name) }))
            .collect()
    }

    fn stamp_path(dir: &Path, stage: Stage) -> PathBuf {
        dir.join(format!("{stage}.done"))
    }

    fn is_done(&self, dir: &Path, stage: Stage) -> Result<bool, HarnessError> {
        let want = fingerprint(self.plan, self.opts, Some(stage))?;
        Ok(!self.opts.force && fs::read_to_string(Self::stamp_path(dir, stage)).is_ok_and(|s| s.trim() == want))
    }

    fn mark_done(&self, dir: &Path, stage: Stage) -> Result<(), HarnessError> {
        let path = Self::stamp_path(dir, stage);
        let text = format!("{}\n", fingerprint(self.plan, self.opts, Some(stage))?);
        fs::write(&path, text).map_err(io_err(&path))
    }

    pub(super) fn run(&self, stage: Stage) -> Result<Vec<StageOutcome>, HarnessError> {
        if stage == Stage::Report {
            let dir = &self.plan.output_dir;
            if self.is_done(dir, stage)? {
                return Ok(vec![StageOutcome { stage, scenario: None, skipped: true, detail: "up to date".into() }]);
            }
            let detail = self.report()?;
            self.mark_done(dir, stage)?;
            return Ok(vec![StageOutcome { stage, scenario: None, skipped: false, detail }]);
        }
        let mut out = Vec::new();
        for s in self.scenarios()? {
            let name = Some(s.scenario.name.clone());
            if self.is_done(&s.dir, stage)? {
                out.push(StageOutcome { stage, scenario: name, skipped: true, detail: "up to date".into() });
                continue;
            }
            mkdir(&s.dir)?;
            let detail = match stage {
                Stage::Generate => self.generate(&s)?,
                Stage::Solve => self.solve(&s)?,
                Stage::Train => self.train(&s)?,
                Stage::Evaluate => self.evaluate(&s)?,
                Stage::Report => unreachable!(),
            };
            self.mark_done(&s.dir, stage)?;
            out.push(StageOutcome { stage, scenario: name, skipped: false, detail });
        }
        Ok(out)
    }

    /// Base streams for every training and evaluation seed, each followed by
    /// its perturbed variants.
    fn generate(&self, s: &ScenarioDir) -> Result<String, HarnessError> {
        let sc = s.scenario;
        let mut seeds: Vec<u64> = sc.train_seeds.seeds().chain(sc.eval_seeds.seeds()).collect();
        seeds.sort_unstable();
        seeds.dedup();
        mkdir(&s.path("streams"))?;
        let variants = self.plan.generate.perturbations;
        let rows: Vec<Vec<ManifestRow>> = seeds
            .par_iter()
            .map(|&seed| {
                let base = generate_scenario_demand(&sc.config, &s.pattern, &Rng::new(seed))?;
                let mut rows = Vec::with_capacity(variants + 1);
                for variant in 0..=variants {
                    let (stream, pct) = if variant == 0 {
                        (base.clone(), 0.0)
                    } else {
                        let mut rng = Rng::new(seed).indexed(rng::PERTURBATION, variant as u64);
                        let pct = draw_perturbation_pct(&mut rng);
                        (perturb_stream(&base, pct, sc.config.epoch_seconds, &mut rng), pct)
                    };
                    let file = stream_file(seed, variant);
                    stream.save(&s.path(&file))?;
                    rows.push(ManifestRow { file, seed, variant, pct, requests: stream.len() });
                }
                Ok(rows)
            })
            .collect::<Result<_, HarnessError>>()?;
        let rows: Vec<ManifestRow> = rows.into_iter().flatten().collect();
        write_csv(&s.path("manifest.csv"), &rows)?;
        Ok(format!("{} stream files from {} seeds", rows.len(), seeds.len()))
    }

    fn label_policy(&self) -> Policy {
        let wall = self.opts.wall_clock;
        match self.plan.solver.label_with {
            SolverChoice::Exact => Policy::MpcExact(self.plan.exact_limits(wall)),
            SolverChoice::Heuristic => Policy::MpcHeuristic(self.plan.heuristic_limits(wall)),
        }
    }

    /// Drive the labelling MPC over every training stream and label the
    /// instances it saw. Rows from one seed's streams share a source id.
    fn solve(&self, s: &ScenarioDir) -> Result<String, HarnessError> {
        let sc = s.scenario;
        let train = sc.train_seeds;
        let rows: Vec<ManifestRow> = s.manifest()?.into_iter().filter(|r| (train.start..train.end).contains(&r.seed)).collect();
        let missing: Vec<u64> = train.seeds().filter(|seed| !rows.iter().any(|r| r.seed == *seed)).collect();
        if let Some(seed) = missing.first() {
            return Err(HarnessError::Missing { path: s.path(&stream_file(*seed, 0)), stage: Stage::Generate });
        }
        let policy = self.label_policy();
        let options = EpisodeOptions { record_instances: true, ..self.episode_options() };
        let episodes: Vec<(&ManifestRow, Vec<MpcInstance>)> = rows
            .par_iter()
            .map(|row| {
                let stream = s.stream(row)?;
                let out = run_episode(&sc.config, &stream, &s.pattern, &policy, row.seed, options)?;
                Ok((row, out.instances))
            })
            .collect::<Result<_, HarnessError>>()?;
        if self.opts.export_mip {
            let dir = s.path("mip");
            mkdir(&dir)?;
            for (row, instances) in &episodes {
                for (epoch, inst) in instances.iter().enumerate() {
                    let path = dir.join(format!("seed-{}-v{}-e{epoch}.lp", row.seed, row.variant));
                    fs::write(&path, export_lp(inst)).map_err(io_err(&path))?;
                }
            }
        }
        let work: Vec<(usize, &MpcInstance)> = episodes
            .iter()
            .flat_map(|(row, instances)| instances.iter().map(move |inst| ((row.seed - train.start) as usize, inst)))
            .collect();
        let solver = self.plan.label_solver(self.opts.wall_clock);
        let labelled = work.par_iter().map(|&(source, inst)| label_instance(inst, source, solver)).collect();
        let multipliers = sc.config.multipliers.clone();
        let set = TrainingSet::new(multipliers, labelled);
        set.save(&s.path("training_set.json"))?;
        Ok(format!("{} labelled instances from {} streams", set.len(), episodes.len()))
    }

    fn train(&self, s: &ScenarioDir) -> Result<String, HarnessError> {
        let path = s.require("training_set.json", Stage::Solve)?;
        let set = TrainingSet::load(&path)?;
        if set.is_empty() {
            return Err(HarnessError::Empty { path, stage: Stage::Solve });
        }
        let t = &self.plan.train;
        let mut rng = Rng::new(t.seed).substream(rng::TRAINING);
        let (train, holdout) = set.split(t.holdout_fraction, &mut rng);
        let pricing = Learner::train(t.learner, Task::Pricing, &train, &t.settings, &mut rng)?.0;
        let relocation = Learner::train(t.learner, Task::Relocation, &train, &t.settings, &mut rng)?.0;
        let mut table = Vec::new();
        if !holdout.is_empty() {
            for (learner, task) in [(&pricing, Task::Pricing), (&relocation, Task::Relocation)] {
                let baseline_name = match task {
                    Task::Pricing => "majority",
                    Task::Relocation => "predict-zero",
                };
                let row = |model: &str, m: LearnerMetrics| ValidationRow {
                    task: task.name().into(),
                    model: model.into(),
                    train_rows: train.len(),
                    holdout_rows: m.rows,
                    mse: m.mse,
                    zero_one: m.zero_one,
                };
                table.push(row(t.learner.name(), evaluate_learner(learner, &holdout, &set.multipliers)?));
                table.push(row(baseline_name, baseline_metrics(task, &train, &holdout, &set.multipliers)?));
            }
        }
        write_csv(&s.path("validation.csv"), &table)?;
        Proxy::new(pricing, relocation)?.save(&s.path("proxy"))?;
        Ok(format!("trained on {} rows, validated on {}", train.len(), holdout.len()))
    }

    fn episode_options(&self) -> EpisodeOptions {
        EpisodeOptions {
            allow_sharing: self.plan.evaluate.allow_sharing,
            router_node_budget: self.plan.evaluate.router_node_budget,
            ..EpisodeOptions::default()
        }
    }

    fn policy(&self, kind: PolicyKind, s: &ScenarioDir) -> Result<Policy, HarnessError> {
        let wall = self.opts.wall_clock;
        Ok(match kind {
            PolicyKind::None => Policy::None,
            PolicyKind::RelocationOnly => Policy::RelocationOnly(self.plan.heuristic_limits(wall)),
            PolicyKind::MpcExact => Policy::MpcExact(self.plan.exact_limits(wall)),
            PolicyKind::MpcHeuristic => Policy::MpcHeuristic(self.plan.heuristic_limits(wall)),
            PolicyKind::MpcClustered => {
                let map = self.plan.merge_map.clone().ok_or_else(|| HarnessError::Plan("mpc-clustered needs a merge_map".into()))?;
                Policy::MpcClustered { merge: ZoneMerge::new(map).map_err(HarnessError::Plan)?, limits: self.plan.heuristic_limits(wall) }
            }
            PolicyKind::Proxy => {
                s.require("proxy/pricing.json", Stage::Train)?;
                s.require("proxy/relocation.json", Stage::Train)?;
                Policy::Proxy(Box::new(Proxy::load(&s.path("proxy"))?))
            }
        })
    }

    /// Every policy on every evaluation seed's base stream, rows ordered by
    /// policy then seed.
    fn evaluate(&self, s: &ScenarioDir) -> Result<String, HarnessError> {
        let sc = s.scenario;
        let manifest = s.manifest()?;
        let streams: Vec<(u64, RequestStream)> = sc
            .eval_seeds
            .seeds()
            .map(|seed| {
                let row = manifest
                    .iter()
                    .find(|r| r.seed == seed && r.variant == 0)
                    .ok_or_else(|| HarnessError::Missing { path: s.path(&stream_file(seed, 0)), stage: Stage::Generate })?;
                Ok((seed, s.stream(row)?))
            })
            .collect::<Result<_, HarnessError>>()?;
        let policies: Vec<Policy> = self.plan.policies.iter().map(|&k| self.policy(k, s)).collect::<Result<_, _>>()?;
        let work: Vec<(&Policy, &(u64, RequestStream))> = policies.iter().flat_map(|p| streams.iter().map(move |st| (p, st))).collect();
        let options = self.episode_options();
        let rows: Vec<Metrics> = work
            .par_iter()
            .map(|(policy, (seed, stream))| Ok(run_episode(&sc.config, stream, &s.pattern, policy, *seed, options)?.metrics))
            .collect::<Result<_, HarnessError>>()?;
        let path = s.path("metrics.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_metrics(&rows, file)?;
        let violations: u64 = rows.iter().map(|m| m.invariant_violations).sum();
        Ok(format!("{} episodes, {violations} invariant violations", rows.len()))
    }

    fn report(&self) -> Result<String, HarnessError> {
        let reference = self.plan.reference_policy().name();
        let (mut summary, mut paired) = (Vec::new(), Vec::new());
        for s in self.scenarios()? {
            let path = s.require("metrics.csv", Stage::Evaluate)?;
            let rows = read_metrics(fs::File::open(&path).map_err(io_err(&path))?)?;
            if rows.is_empty() {
                return Err(HarnessError::Empty { path, stage: Stage::Evaluate });
            }
            summary.extend(summarize(&s.scenario.name, &rows));
            paired.extend(paired_deltas(&s.scenario.name, &rows, reference));
        }
        let out = &self.plan.output_dir;
        write_csv(&out.join("report.csv"), &summary)?;
        write_csv(&out.join("paired.csv"), &paired)?;
        Ok(format!("{} summary rows, {} paired rows against {reference}", summary.len(), paired.len()))
    }
}
