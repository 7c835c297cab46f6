//! Label MPC instances, train both learners, compare them with trivial
//! baselines and use the resulting proxy on a fresh instance.
//!
//! `cargo run --release --example proxy_pipeline -- [zone-shared|flat|forest]`

use std::time::Instant;

use ridehail::config::ScenarioConfig;
use ridehail::demand::{generate_scenario_demand, DemandPattern};
use ridehail::mpc::HeuristicLimits;
use ridehail::proxy::{
    baseline_metrics, build_training_set, evaluate_learner, LabelSolver, Learner, LearnerKind, LearnerSettings, Proxy, Task,
};
use ridehail::rng::Rng;
use ridehail::sim::{run_episode, EpisodeOptions, Policy};

fn main() -> anyhow::Result<()> {
    let kind: LearnerKind = std::env::args().nth(1).unwrap_or_else(|| "forest".into()).parse()?;
    let cfg = ScenarioConfig { zone_spacing_seconds: 600.0, ..ScenarioConfig::default() };
    let pattern = DemandPattern::from_name("hub-and-spoke", &cfg)?;
    let mpc = Policy::MpcHeuristic(HeuristicLimits::default());

    let started = Instant::now();
    let mut instances = Vec::new();
    for seed in 1000..1020 {
        let stream = generate_scenario_demand(&cfg, &pattern, &Rng::new(seed))?;
        let opts = EpisodeOptions { record_instances: true, ..EpisodeOptions::default() };
        instances.extend(run_episode(&cfg, &stream, &pattern, &mpc, seed, opts)?.instances);
    }
    let set = build_training_set(&instances, 3, LabelSolver::Heuristic(HeuristicLimits::default()), &Rng::new(7));
    println!("{} labelled rows in {:.1?}", set.len(), started.elapsed());

    let mut rng = Rng::new(8).substream("training");
    let (train, holdout) = set.split(0.2, &mut rng);
    let settings = LearnerSettings::default();
    let pricing = Learner::train(kind, Task::Pricing, &train, &settings, &mut rng)?.0;
    let relocation = Learner::train(kind, Task::Relocation, &train, &settings, &mut rng)?.0;
    for (learner, task) in [(&pricing, Task::Pricing), (&relocation, Task::Relocation)] {
        let m = evaluate_learner(learner, &holdout, &set.multipliers)?;
        let b = baseline_metrics(task, &train, &holdout, &set.multipliers)?;
        println!("{:>10}: mse {:.4} (baseline {:.4}), 0-1 {:?} (baseline {:?})", task.name(), m.mse, b.mse, m.zero_one, b.zero_one);
    }

    let proxy = Proxy::new(pricing, relocation)?;
    let decision = proxy.decide(&instances[30], &mut Rng::new(0).substream("restoration"))?;
    println!("multipliers {:?}", decision.actions.multipliers);
    println!("relocations\n{}", decision.actions.relocation);
    println!("decided in {:.2?}", decision.elapsed);
    Ok(())
}
