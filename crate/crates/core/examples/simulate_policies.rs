//! Every policy on the same seeds of a supply-scarce hub-and-spoke scenario.
//!
//! `cargo run --release --example simulate_policies -- [seeds] [zone spacing seconds]`

use ridehail::config::ScenarioConfig;
use ridehail::demand::{generate_scenario_demand, DemandPattern};
use ridehail::mpc::HeuristicLimits;
use ridehail::rng::Rng;
use ridehail::sim::{run_episode, write_trace, EpisodeOptions, Policy, ZoneMerge};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(Ok(10), |s| s.parse())?;
    let spacing: f64 = args.next().map_or(Ok(600.0), |s| s.parse())?;
    let cfg = ScenarioConfig { zone_spacing_seconds: spacing, ..ScenarioConfig::default() };
    let pattern = DemandPattern::from_name("hub-and-spoke", &cfg)?;
    let limits = HeuristicLimits::default();
    let policies = [
        Policy::None,
        Policy::RelocationOnly(limits),
        Policy::MpcHeuristic(limits),
        Policy::MpcClustered { merge: ZoneMerge::new(vec![0, 1, 2, 0, 1, 2]).map_err(anyhow::Error::msg)?, limits },
    ];
    println!("{:<16} {:>8} {:>9} {:>10} {:>9} {:>12}", "policy", "served", "dropout%", "discarded", "wait s", "relocations");
    for policy in &policies {
        let mut totals = [0.0; 5];
        for seed in 0..seeds {
            let stream = generate_scenario_demand(&cfg, &pattern, &Rng::new(seed))?;
            let m = run_episode(&cfg, &stream, &pattern, policy, seed, EpisodeOptions::default())?.metrics;
            assert_eq!(m.invariant_violations, 0);
            for (t, v) in totals.iter_mut().zip([m.served as f64, m.dropout_pct, m.discarded as f64, m.mean_wait_s, m.relocations as f64]) {
                *t += v / seeds as f64;
            }
        }
        let [s, d, x, w, r] = totals;
        println!("{:<16} {s:>8.1} {d:>9.1} {x:>10.1} {w:>9.1} {r:>12.1}", policy.kind().name());
    }

    let stream = generate_scenario_demand(&cfg, &pattern, &Rng::new(0))?;
    let out = run_episode(&cfg, &stream, &pattern, &policies[2], 0, EpisodeOptions { trace: true, ..EpisodeOptions::default() })?;
    println!("\nfirst three epochs of the mpc-heuristic trace:");
    write_trace(&out.trace[..3], std::io::stdout())?;
    Ok(())
}
