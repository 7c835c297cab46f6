//! Zone layout, travel times and the two weight families for the default scenario.

use ridehail::config::ScenarioConfig;
use ridehail::geometry::{travel_for_config, ZoneLayout};
use ridehail::weights::{service_window, weight_qp, weight_qr};

fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig::default();
    let layout = ZoneLayout::from_config(&cfg);
    let travel = travel_for_config(&cfg)?;

    println!("zone centroids (seconds):");
    for (z, [x, y]) in layout.centroids().into_iter().enumerate() {
        println!("  zone {z}: ({x:.0}, {y:.0})");
    }
    println!("travel seconds / epochs from zone 0:");
    for j in 0..cfg.zone_count {
        println!("  -> {j}: {:>6.1} s, {} epochs", travel.seconds[[0, j]], travel.epochs[[0, j]]);
    }

    println!("service weight for a request placed in epoch t, picked up in rho:");
    for t in 1..=cfg.horizon {
        let row: Vec<String> =
            service_window(t, cfg.horizon, cfg.patience).map(|rho| format!("rho={rho}: {:.4}", weight_qp(t, rho, &cfg).unwrap())).collect();
        println!("  t={t}  {}", row.join("  "));
    }
    println!("relocation cost 0 -> 1 by epoch:");
    for t in 1..=cfg.horizon {
        println!("  t={t}  {:.4}", weight_qr(0, 1, t, &cfg, &travel));
    }
    Ok(())
}
