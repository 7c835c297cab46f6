//! Build one MPC instance from a forecast, solve it exactly and heuristically,
//! validate both and print the first-epoch actions.

use ridehail::config::ScenarioConfig;
use ridehail::demand::DemandPattern;
use ridehail::geometry::travel_for_config;
use ridehail::mpc::{
    build_instance, export_lp, first_epoch_actions, solve_exact, solve_heuristic, validate_solution, ExactLimits,
    HeuristicLimits, VehicleAvailability,
};
use ridehail::sim::forecast_demand;

fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig { zone_count: 3, grid_columns: 3, horizon: 3, fleet_size: 8, ..ScenarioConfig::default() };
    let pattern = DemandPattern::from_name("hub-and-spoke", &cfg)?;
    let travel = travel_for_config(&cfg)?;
    // Every vehicle starts idle in zone 0 except two still finishing trips.
    let fleet: Vec<_> = (0..cfg.fleet_size)
        .map(|v| VehicleAvailability { zone: if v < 6 { 0 } else { 2 }, seconds_until_idle: if v < 6 { 0 } else { 420 } })
        .collect();
    let inst = build_instance(&forecast_demand(&cfg, &pattern, 8)?, &fleet, &cfg, &travel)?;
    println!("idle vehicles (zone x epoch):\n{}", inst.idle);

    let exact = solve_exact(&inst, ExactLimits { nodes: 2_000_000, ..ExactLimits::default() });
    let heuristic = solve_heuristic(&inst, HeuristicLimits::default());
    for (name, sol) in [("exact", &exact), ("heuristic", &heuristic)] {
        let report = validate_solution(&inst, sol);
        println!("{name:>9}: objective {:.4}, status {:?}, violations {}", sol.objective, sol.status, report.violations.len());
    }
    let actions = first_epoch_actions(&inst, &exact);
    println!("first-epoch multipliers: {:?}", actions.multipliers);
    println!("first-epoch relocations:\n{}", actions.relocation);

    let lp = export_lp(&inst);
    println!("LP export: {} lines (first: {:?})", lp.lines().count(), lp.lines().next().unwrap_or(""));
    println!("instance dump: {} bytes of TOML", inst.to_toml()?.len());
    Ok(())
}
