//! Synthetic demand, zone-level aggregation, destination split and a
//! forecaster trained on three weeks of history.

use ndarray::Array2;
use ridehail::config::ScenarioConfig;
use ridehail::demand::{
    aggregate_zone_demand, daily_counts, disaggregate, generate_scenario_demand, smape, train_forecaster, DemandPattern,
    DestinationDistribution, ForecastSettings,
};
use ridehail::rng::Rng;

fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig::default();
    let pattern = DemandPattern::from_name("morning-rush", &cfg)?;
    let days: Vec<_> = (0..22).map(|d| generate_scenario_demand(&cfg, &pattern, &Rng::new(d))).collect::<Result<_, _>>()?;
    let today = &days[21];
    println!("day 21: {} requests", today.len());

    let zone = aggregate_zone_demand(today, cfg.zone_count, cfg.episode_epochs, cfg.epoch_seconds, cfg.rideshare);
    println!("vehicles needed per zone, epochs 0..8:");
    for i in 0..cfg.zone_count {
        println!("  zone {i}: {:?}", zone.row(i).iter().take(8).collect::<Vec<_>>());
    }
    let mu = DestinationDistribution::from_streams(&days[..21], cfg.zone_count);
    let split = disaggregate(&zone, &mu)?;
    println!("zone 0 destinations in epoch 10: {:?}", split.vehicles.slice(ndarray::s![0, .., 10]).to_vec());

    let mut settings = ForecastSettings::default();
    settings.train.epochs = 30;
    let (model, log) = train_forecaster(&days[..21], &cfg, &settings, &mut Rng::new(1).substream("training"))?;
    println!("forecaster trained, final loss {:.4}", log.last().map_or(0.0, |l| l.train_loss));

    let counts = daily_counts(&days, &cfg);
    let (k, h) = (settings.recent_epochs, cfg.horizon);
    let e = 10;
    let recent = Array2::from_shape_fn((cfg.zone_count, k), |(i, t)| counts[21][[i, e - k + t]] as f64);
    let week_ago = Array2::from_shape_fn((cfg.zone_count, h), |(i, t)| counts[14][[i, e + t]] as f64);
    let pred = model.forecast(&recent, &week_ago)?;
    let actual = Array2::from_shape_fn((cfg.zone_count, h), |(i, t)| counts[21][[i, e + t]] as f64);
    println!("forecast from epoch {e}: sMAPE {:.3}", smape(pred.as_slice().unwrap(), actual.as_slice().unwrap()));
    Ok(())
}
