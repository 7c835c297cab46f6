//! Zone-level demand forecaster.
//!
//! One network is shared by all zones. For zone `i` and forecast start `e` it
//! sees the last `k` epochs of zone demand plus the same `T` epochs one week
//! earlier, and predicts the next `T` epochs. Counts are divided by the
//! history's mean level before training so one set of hyperparameters works
//! across demand volumes.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{aggregate_zone_demand, DemandError, RequestStream};
use crate::config::ScenarioConfig;
use crate::nn::{Activation, EpochLog, Mlp, TrainOptions};
use crate::rng::Stream;

pub const DAYS_PER_WEEK: usize = 7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastSettings {
    pub recent_epochs: usize,
    pub hidden: Vec<usize>,
    pub train: TrainOptions,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            recent_epochs: 6,
            hidden: vec![64, 64],
            train: TrainOptions { epochs: 60, batch_size: 32, learning_rate: 1e-3, l1: 1e-5 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub zones: usize,
    pub recent_epochs: usize,
    pub horizon: usize,
    /// Mean zone-epoch count of the training history; zero means no demand was ever seen.
    pub level: f64,
    pub net: Option<Mlp>,
}

impl ForecastModel {
    /// Predict `zones x horizon` demand from `recent` (`zones x k`) and
    /// `week_ago` (`zones x horizon`). Entries are clamped at zero.
    pub fn forecast(&self, recent: &Array2<f64>, week_ago: &Array2<f64>) -> Result<Array2<f64>, DemandError> {
        if recent.dim() != (self.zones, self.recent_epochs) || week_ago.dim() != (self.zones, self.horizon) {
            return Err(DemandError::Shape(format!(
                "expected recent {:?} and week-ago {:?}, got {:?} and {:?}",
                (self.zones, self.recent_epochs),
                (self.zones, self.horizon),
                recent.dim(),
                week_ago.dim()
            )));
        }
        let mut out = Array2::zeros((self.zones, self.horizon));
        let Some(net) = &self.net else { return Ok(out) };
        for i in 0..self.zones {
            let x: Vec<f64> = recent.row(i).iter().chain(week_ago.row(i).iter()).map(|v| v / self.level).collect();
            for (t, p) in net.forward(&x).into_iter().enumerate() {
                out[[i, t]] = (p * self.level).max(0.0);
            }
        }
        Ok(out)
    }
}

/// Per-day `zones x epochs` counts for each day-stream.
pub fn daily_counts(history: &[RequestStream], cfg: &ScenarioConfig) -> Vec<Array2<u32>> {
    history
        .iter()
        .map(|s| aggregate_zone_demand(s, cfg.zone_count, cfg.episode_epochs, cfg.epoch_seconds, cfg.rideshare))
        .collect()
}

fn sample_rows(days: &[Array2<u32>], k: usize, horizon: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for d in DAYS_PER_WEEK..days.len() {
        let (today, last_week) = (&days[d], &days[d - DAYS_PER_WEEK]);
        let (zones, epochs) = today.dim();
        if epochs < k + horizon {
            continue;
        }
        for e in k..=epochs - horizon {
            for i in 0..zones {
                let mut x: Vec<f64> = (e - k..e).map(|t| today[[i, t]] as f64).collect();
                x.extend((e..e + horizon).map(|t| last_week[[i, t]] as f64));
                xs.push(x);
                ys.push((e..e + horizon).map(|t| today[[i, t]] as f64).collect());
            }
        }
    }
    (xs, ys)
}

/// Train on a sequence of consecutive day-streams (at least two weeks).
pub fn train_forecaster(
    history: &[RequestStream],
    cfg: &ScenarioConfig,
    settings: &ForecastSettings,
    rng: &mut Stream,
) -> Result<(ForecastModel, Vec<EpochLog>), DemandError> {
    if history.len() < 2 * DAYS_PER_WEEK {
        return Err(DemandError::InsufficientHistory { days: history.len(), needed: 2 * DAYS_PER_WEEK });
    }
    let k = settings.recent_epochs;
    let horizon = cfg.horizon;
    if cfg.episode_epochs < k + horizon {
        return Err(DemandError::InsufficientHistory { days: history.len(), needed: 2 * DAYS_PER_WEEK });
    }
    let days = daily_counts(history, cfg);
    let cells = days.iter().map(|d| d.len()).sum::<usize>().max(1);
    let level = days.iter().flat_map(|d| d.iter()).map(|&v| v as f64).sum::<f64>() / cells as f64;
    let mut model = ForecastModel { zones: cfg.zone_count, recent_epochs: k, horizon, level, net: None };
    if level == 0.0 {
        return Ok((model, Vec::new()));
    }
    let (xs, ys) = sample_rows(&days, k, horizon);
    let scale = |rows: Vec<Vec<f64>>| rows.into_iter().map(|r| r.into_iter().map(|v| v / level).collect()).collect::<Vec<_>>();
    let (xs, ys) = (scale(xs), scale(ys));
    let mut net = Mlp::new(k + horizon, &settings.hidden, horizon, Activation::Relu, rng);
    let log = net.fit(&xs, &ys, &settings.train, rng);
    model.net = Some(net);
    Ok((model, log))
}

/// Symmetric mean absolute percentage error in `[0, 2]`; cells where both
/// values are zero count as exact.
pub fn smape(pred: &[f64], actual: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter()
        .zip(actual)
        .map(|(p, a)| {
            let denom = p.abs() + a.abs();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (p - a).abs() / denom
            }
        })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Request;
    use crate::rng::Rng;
    use rand_distr::{Distribution, Poisson};

    fn cfg() -> ScenarioConfig {
        ScenarioConfig { zone_count: 3, episode_epochs: 24, horizon: 6, rideshare: 1.0, ..Default::default() }
    }

    /// One day-stream per day with `rate(day, epoch, zone)` riders.
    fn days(n: usize, cfg: &ScenarioConfig, mut rate: impl FnMut(usize, usize, usize) -> u32) -> Vec<RequestStream> {
        (0..n)
            .map(|d| {
                let mut reqs = Vec::new();
                for e in 0..cfg.episode_epochs {
                    for z in 0..cfg.zone_count {
                        for _ in 0..rate(d, e, z) {
                            reqs.push(Request { id: reqs.len() as u64, origin: z, dest: 0, time_s: e as u64 * cfg.epoch_seconds, riders: 1 });
                        }
                    }
                }
                RequestStream::new(reqs)
            })
            .collect()
    }

    fn windows(counts: &Array2<u32>, last_week: &Array2<u32>, e: usize, k: usize, h: usize) -> (Array2<f64>, Array2<f64>) {
        let z = counts.nrows();
        (
            Array2::from_shape_fn((z, k), |(i, t)| counts[[i, e - k + t]] as f64),
            Array2::from_shape_fn((z, h), |(i, t)| last_week[[i, e + t]] as f64),
        )
    }

    #[test]
    fn needs_two_weeks() {
        let c = cfg();
        let h = days(13, &c, |_, _, _| 1);
        let mut rng = Rng::new(0).substream("f");
        assert!(matches!(
            train_forecaster(&h, &c, &ForecastSettings::default(), &mut rng),
            Err(DemandError::InsufficientHistory { days: 13, .. })
        ));
    }

    #[test]
    fn zero_history_predicts_zero() {
        let c = cfg();
        let h = days(14, &c, |_, _, _| 0);
        let mut rng = Rng::new(0).substream("f");
        let (m, _) = train_forecaster(&h, &c, &ForecastSettings::default(), &mut rng).unwrap();
        let p = m.forecast(&Array2::zeros((3, 6)), &Array2::zeros((3, 6))).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_demand_is_learned() {
        let c = cfg();
        let r = 5;
        let h = days(16, &c, |_, _, _| r);
        let mut rng = Rng::new(1).substream("f");
        let (m, log) = train_forecaster(&h, &c, &ForecastSettings::default(), &mut rng).unwrap();
        assert!(log.last().unwrap().train_loss < log[0].train_loss);
        let held_out = daily_counts(&days(1, &c, |_, _, _| r), &c)[0].clone();
        let (recent, week) = windows(&held_out, &held_out, 10, 6, 6);
        let p = m.forecast(&recent, &week).unwrap();
        assert_eq!(p.dim(), (3, 6));
        for v in p.iter() {
            assert!((v - r as f64).abs() <= 0.2 * r as f64, "prediction {v}");
        }
    }

    #[test]
    fn periodic_pattern_beats_last_epoch_baseline() {
        let c = cfg();
        let mut noise = Rng::new(2).substream("noise");
        let mean = |d: usize, e: usize, z: usize| {
            let weekday = d % 7 < 5;
            let shape = 1.0 + (e as f64 / 24.0 * std::f64::consts::TAU).sin();
            let base = if weekday { 6.0 } else { 2.0 };
            base * shape * (1.0 + 0.3 * z as f64) + 0.2
        };
        let n_days = 28;
        let history = days(n_days, &c, |d, e, z| Poisson::new(mean(d, e, z)).unwrap().sample(&mut noise) as u32);
        let train = &history[..21];
        let mut rng = Rng::new(3).substream("f");
        let (m, _) = train_forecaster(train, &c, &ForecastSettings::default(), &mut rng).unwrap();
        let all = daily_counts(&history, &c);
        let (mut model_err, mut naive_err) = (Vec::new(), Vec::new());
        for d in 21..n_days {
            for e in (6..=18).step_by(3) {
                let (recent, week) = windows(&all[d], &all[d - 7], e, 6, 6);
                let pred = m.forecast(&recent, &week).unwrap();
                for i in 0..3 {
                    let actual: Vec<f64> = (e..e + 6).map(|t| all[d][[i, t]] as f64).collect();
                    model_err.push(smape(&pred.row(i).to_vec(), &actual));
                    naive_err.push(smape(&[all[d][[i, e - 1]] as f64; 6], &actual));
                }
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(avg(&model_err) < avg(&naive_err), "model {} naive {}", avg(&model_err), avg(&naive_err));
    }

    #[test]
    fn smape_edges() {
        assert_eq!(smape(&[0.0], &[0.0]), 0.0);
        assert_eq!(smape(&[1.0], &[0.0]), 2.0);
        assert!((smape(&[2.0, 2.0], &[2.0, 2.0])).abs() < 1e-12);
    }
}
