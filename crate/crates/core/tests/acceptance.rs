//! One line per acceptance criterion, then a single assertion over all of them.

mod common;

use std::time::Instant;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ridehail::config::ScenarioConfig;
use ridehail::demand::{generate_scenario_demand, DemandPattern};
use ridehail::geometry::travel_for_config;
use ridehail::mpc::{
    build_instance, solve_exact, solve_heuristic, validate_solution, ExactLimits, HeuristicLimits, SolveStatus,
    VehicleAvailability,
};
use ridehail::proxy::{
    baseline_metrics, build_training_set, evaluate_learner, restore_feasibility, AggRelocation, LabelSolver, Learner,
    LearnerKind, LearnerSettings, Proxy, Task, TrainingSet,
};
use ridehail::rng::{self, Rng};
use ridehail::sim::{forecast_demand, run_episode, write_metrics, EpisodeOptions, Metrics, Policy, ZoneMerge};
use ridehail::transport::solve_transport;

const TRANSPORT_INSTANCES: u64 = 500;
const TRANSPORT_SECONDS: f64 = 1.0;
const MICRO_INSTANCES: u64 = 200;
const EXACT_TOLERANCE: f64 = 1e-6;
const EXACT_SECONDS: f64 = 60.0;
const HEURISTIC_RATIO: f64 = 0.95;
const HEURISTIC_SHARE: f64 = 0.90;
const FUZZ_CASES: u64 = 10_000;
const PROXY_EPOCHS: u64 = 100;
const PROXY_LATENCY_SECONDS: f64 = 1.0;
const LARGE_ZONES: usize = 24;
const LARGE_TOTAL: usize = 200;
const TRAINING_ROWS: usize = 2000;
const POLICY_SEEDS: u64 = 20;
const PROXY_GAP: f64 = 0.10;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<(usize, &'static str, Outcome)>, id: usize, name: &'static str, outcome: Outcome) {
    println!("criterion {id} {name}: {} ({})", if outcome.passed { "PASS" } else { "FAIL" }, outcome.detail);
    results.push((id, name, outcome));
}

fn transport_oracle() -> Outcome {
    let problems: Vec<_> = (0..TRANSPORT_INSTANCES).map(common::small_transport).collect();
    let started = Instant::now();
    let plans: Vec<_> = problems.iter().map(|p| solve_transport(p).map(|plan| plan.cost(p))).collect();
    let seconds = started.elapsed().as_secs_f64();
    let mismatches = problems
        .iter()
        .zip(&plans)
        .filter(|(p, got)| !matches!(got, Ok(c) if *c == common::transport_brute_force(p)))
        .count();
    Outcome {
        passed: mismatches == 0 && seconds < TRANSPORT_SECONDS,
        detail: format!("{TRANSPORT_INSTANCES} instances, {mismatches} mismatches, {seconds:.3} s"),
    }
}

/// Criteria 2 and 3 share the micro suite.
fn micro_suite() -> (Outcome, Outcome) {
    let instances: Vec<_> = (0..MICRO_INSTANCES).map(common::micro_instance).collect();
    let started = Instant::now();
    let exact: Vec<_> = instances.iter().map(|inst| solve_exact(inst, ExactLimits::default())).collect();
    let seconds = started.elapsed().as_secs_f64();
    let (mut wrong, mut invalid) = (0, 0);
    let mut close = 0;
    for (inst, sol) in instances.iter().zip(&exact) {
        let want = common::oracle::exhaustive_optimum(inst);
        if sol.status != SolveStatus::Optimal || (sol.objective - want).abs() > EXACT_TOLERANCE {
            wrong += 1;
        }
        if !validate_solution(inst, sol).is_empty() {
            invalid += 1;
        }
        let h = solve_heuristic(inst, HeuristicLimits::default());
        if validate_solution(inst, &h).is_empty() && h.objective >= HEURISTIC_RATIO * sol.objective - 1e-9 {
            close += 1;
        }
    }
    let share = close as f64 / MICRO_INSTANCES as f64;
    (
        Outcome {
            passed: wrong == 0 && invalid == 0 && seconds < EXACT_SECONDS,
            detail: format!("{MICRO_INSTANCES} instances, {wrong} off the oracle, {invalid} invalid, {seconds:.2} s"),
        },
        Outcome {
            passed: share >= HEURISTIC_SHARE,
            detail: format!("{close}/{MICRO_INSTANCES} within {HEURISTIC_RATIO} of exact ({:.1}%)", 100.0 * share),
        },
    )
}

fn fuzz_value(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = match rng.random_range(0..4) {
        0 => 0.0,
        1 => rng.random_range(0.0..3.0),
        2 => rng.random_range(0.0..1e3),
        _ => rng.random_range(0.0..=1e9),
    };
    if rng.random_bool(0.5) {
        -magnitude
    } else {
        magnitude
    }
}

fn restoration_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for case in 0..FUZZ_CASES {
        let z = rng.random_range(1..=LARGE_ZONES);
        let idle: Vec<u32> = (0..z).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..50) }).collect();
        let raw = AggRelocation { outbound: (0..z).map(|_| fuzz_value(&mut rng)).collect(), inbound: (0..z).map(|_| fuzz_value(&mut rng)).collect() };
        let out = restore_feasibility(&raw, &idle, &mut Rng::new(case).substream(rng::RESTORATION));
        let balanced = out.outbound.iter().sum::<u64>() == out.inbound.iter().sum::<u64>();
        let capped = out.outbound.iter().zip(&idle).all(|(&o, &v)| o <= v as u64);
        // u64 entries are integral and nonnegative by construction.
        if !(balanced && capped && out.outbound.len() == z && out.inbound.len() == z) {
            bad += 1;
        }
    }
    Outcome { passed: bad == 0, detail: format!("{FUZZ_CASES} cases, {bad} infeasible") }
}

fn suite_config() -> ScenarioConfig {
    ScenarioConfig { zone_spacing_seconds: 600.0, ..ScenarioConfig::default() }
}

/// Labelled instances seen by the heuristic MPC on training seeds disjoint from evaluation.
fn training_set(cfg: &ScenarioConfig, pattern: &DemandPattern) -> TrainingSet {
    let mpc = Policy::MpcHeuristic(HeuristicLimits::default());
    let instances: Vec<_> = (1000..1040u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let stream = generate_scenario_demand(cfg, pattern, &Rng::new(seed)).unwrap();
            let opts = EpisodeOptions { record_instances: true, ..EpisodeOptions::default() };
            run_episode(cfg, &stream, pattern, &mpc, seed, opts).unwrap().instances
        })
        .collect();
    build_training_set(&instances, 3, LabelSolver::Heuristic(HeuristicLimits::default()), &Rng::new(7))
}

fn learning_sanity(set: &TrainingSet) -> (Outcome, Proxy) {
    let mut rng = Rng::new(8).substream(rng::TRAINING);
    let (train, holdout) = set.split(0.2, &mut rng);
    let disjoint = train.iter().all(|r| holdout.iter().all(|h| h.source != r.source));
    let settings = LearnerSettings::default();
    let pricing = Learner::train(LearnerKind::ZoneShared, Task::Pricing, &train, &settings, &mut rng).unwrap().0;
    let relocation = Learner::train(LearnerKind::ZoneShared, Task::Relocation, &train, &settings, &mut rng).unwrap().0;
    let p = evaluate_learner(&pricing, &holdout, &set.multipliers).unwrap();
    let pb = baseline_metrics(Task::Pricing, &train, &holdout, &set.multipliers).unwrap();
    let r = evaluate_learner(&relocation, &holdout, &set.multipliers).unwrap();
    let rb = baseline_metrics(Task::Relocation, &train, &holdout, &set.multipliers).unwrap();
    let (loss, base_loss) = (p.zero_one.unwrap(), pb.zero_one.unwrap());
    let outcome = Outcome {
        passed: set.len() >= TRAINING_ROWS && disjoint && loss < base_loss && r.mse < rb.mse,
        detail: format!(
            "{} rows, holdout {} disjoint={disjoint}, pricing 0-1 {loss:.4} vs majority {base_loss:.4}, relocation mse {:.4} vs zero {:.4}",
            set.len(),
            holdout.len(),
            r.mse,
            rb.mse
        ),
    };
    (outcome, Proxy::new(pricing, relocation).unwrap())
}

fn large_latency(proxy: &Proxy) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut checked = 0;
    for seed in 0..50 {
        let cfg = ScenarioConfig {
            zone_count: LARGE_ZONES,
            grid_columns: 6,
            fleet_size: rng.random_range(LARGE_TOTAL / 2..=LARGE_TOTAL),
            ..ScenarioConfig::default()
        };
        let pattern = DemandPattern::Uniform { rate: rng.random_range(0.5..1.5) };
        let fleet: Vec<_> = (0..cfg.fleet_size)
            .map(|_| VehicleAvailability { zone: rng.random_range(0..LARGE_ZONES), seconds_until_idle: 0 })
            .collect();
        let demand = forecast_demand(&cfg, &pattern, 0).unwrap();
        let inst = build_instance(&demand, &fleet, &cfg, &travel_for_config(&cfg).unwrap()).unwrap();
        if inst.total_supply() as usize > LARGE_TOTAL || inst.base_demand.sum() as usize > LARGE_TOTAL {
            continue;
        }
        let started = Instant::now();
        proxy.decide(&inst, &mut Rng::new(seed).substream(rng::RESTORATION)).unwrap();
        worst = worst.max(started.elapsed().as_secs_f64());
        checked += 1;
    }
    (worst, checked)
}

fn mean(rows: &[Metrics], f: impl Fn(&Metrics) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    report(&mut results, 1, "transport oracle", transport_oracle());
    let (exact, heuristic) = micro_suite();
    report(&mut results, 2, "exact oracle", exact);
    report(&mut results, 3, "heuristic quality", heuristic);
    report(&mut results, 4, "restoration safety", restoration_fuzz());

    let cfg = suite_config();
    let pattern = DemandPattern::from_name("hub-and-spoke", &cfg).unwrap();
    let set = training_set(&cfg, &pattern);
    let (learning, proxy) = learning_sanity(&set);
    let (latency, large) = large_latency(&proxy);

    let merge = ZoneMerge::new(vec![0, 1, 2, 0, 1, 2]).unwrap();
    let policies = [
        Policy::RelocationOnly(HeuristicLimits::default()),
        Policy::MpcHeuristic(HeuristicLimits::default()),
        Policy::MpcClustered { merge, limits: HeuristicLimits::default() },
        Policy::Proxy(Box::new(proxy)),
    ];
    let streams: Vec<_> = (0..POLICY_SEEDS).map(|s| generate_scenario_demand(&cfg, &pattern, &Rng::new(s)).unwrap()).collect();
    let work: Vec<(usize, u64)> = (0..policies.len()).flat_map(|p| (0..POLICY_SEEDS).map(move |s| (p, s))).collect();
    let runs: Vec<_> = work
        .par_iter()
        .map(|&(p, s)| (p, run_episode(&cfg, &streams[s as usize], &pattern, &policies[p], s, EpisodeOptions::default())))
        .collect();
    let aborts = runs.iter().filter(|(_, r)| r.is_err()).count();
    let outcomes: Vec<(usize, _)> = runs.into_iter().filter_map(|(p, r)| r.ok().map(|o| (p, o))).collect();
    let rows = |p: usize| outcomes.iter().filter(|(q, _)| *q == p).map(|(_, o)| o.metrics.clone()).collect::<Vec<_>>();
    let (reloc, full, clustered, proxied) = (rows(0), rows(1), rows(2), rows(3));
    let proxy_epochs: u64 = proxied.iter().map(|m| m.decisions).sum();
    let proxy_aborts = POLICY_SEEDS as usize - proxied.len();
    let worst_epoch = outcomes.iter().filter(|(p, _)| *p == 3).map(|(_, o)| o.max_decision_s).fold(0.0, f64::max);

    report(
        &mut results,
        5,
        "proxy feasibility",
        Outcome {
            passed: proxy_aborts == 0 && proxy_epochs >= PROXY_EPOCHS && large > 0 && latency < PROXY_LATENCY_SECONDS,
            detail: format!(
                "{proxy_epochs} epochs, {proxy_aborts} aborts, worst decision {worst_epoch:.4} s at 6 zones, {latency:.4} s over {large} instances at {LARGE_ZONES} zones"
            ),
        },
    );
    report(&mut results, 6, "learning sanity", learning);

    let served = |r: &[Metrics]| mean(r, |m| m.served as f64);
    let dropout = |r: &[Metrics]| mean(r, |m| m.dropout_pct);
    let complete = [&reloc, &full, &clustered, &proxied].iter().all(|r| r.len() == POLICY_SEEDS as usize);
    let paired_gain = mean(&full, |m| m.served as f64) - mean(&clustered, |m| m.served as f64);
    let wins = full.iter().zip(&clustered).filter(|(a, b)| a.seed == b.seed && a.served >= b.served).count();
    let gap = (served(&proxied) - served(&full)).abs() / served(&full);
    let ordering = complete
        && served(&full) >= served(&clustered)
        && dropout(&full) <= dropout(&reloc)
        && dropout(&clustered) <= dropout(&reloc)
        && gap <= PROXY_GAP;
    report(
        &mut results,
        7,
        "policy ordering",
        Outcome {
            passed: ordering,
            detail: format!(
                "{POLICY_SEEDS} seeds; served full {:.1} clustered {:.1} proxy {:.1} relocation-only {:.1} (full-clustered {paired_gain:+.1}, full >= clustered on {wins} seeds); dropout full {:.1}% clustered {:.1}% relocation-only {:.1}%; proxy gap {:.1}%",
                served(&full),
                served(&clustered),
                served(&proxied),
                served(&reloc),
                dropout(&full),
                dropout(&clustered),
                dropout(&reloc),
                100.0 * gap
            ),
        },
    );

    let small = ScenarioConfig { episode_epochs: 8, ..cfg.clone() };
    let mut identical = 0;
    let mut determinism_rows = Vec::new();
    let exact = Policy::MpcExact(ExactLimits { nodes: 20_000, ..ExactLimits::default() });
    for (k, policy) in policies.iter().chain([&Policy::None, &exact]).enumerate() {
        let stream = generate_scenario_demand(&small, &pattern, &Rng::new(77 + k as u64)).unwrap();
        let csv = |m: Metrics| {
            let mut buf = Vec::new();
            write_metrics(&[m], &mut buf).unwrap();
            buf
        };
        let a = run_episode(&small, &stream, &pattern, policy, 5, EpisodeOptions::default()).unwrap().metrics;
        let b = run_episode(&small, &stream, &pattern, policy, 5, EpisodeOptions::default()).unwrap().metrics;
        determinism_rows.push(a.clone());
        identical += usize::from(csv(a) == csv(b));
    }
    report(
        &mut results,
        8,
        "determinism",
        Outcome { passed: identical == policies.len() + 2, detail: format!("{identical}/{} policies byte-identical", policies.len() + 2) },
    );

    let all: Vec<&Metrics> = outcomes.iter().map(|(_, o)| &o.metrics).chain(&determinism_rows).collect();
    let violations: u64 = all.iter().map(|m| m.invariant_violations).sum();
    let unbalanced = all.iter().filter(|m| !m.is_balanced()).count();
    report(
        &mut results,
        9,
        "conservation",
        Outcome {
            passed: aborts == 0 && violations == 0 && unbalanced == 0,
            detail: format!("{} episodes, {violations} violations, {unbalanced} unbalanced, {aborts} aborts", all.len()),
        },
    );

    let failed: Vec<String> = results.iter().filter(|(_, _, o)| !o.passed).map(|(id, name, _)| format!("{id} {name}")).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
