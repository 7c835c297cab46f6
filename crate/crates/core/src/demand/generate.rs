//! Synthetic demand profiles and Poisson request generation.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{DemandError, Request, RequestStream};
use crate::config::ScenarioConfig;
use crate::geometry::ZoneLayout;
use crate::numeric::round_half_up;
use crate::rng::{self, Rng, Stream};

/// Expected request counts per origin-destination pair and epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DemandPattern {
    /// `rate` requests per origin zone per epoch, destinations uniform.
    Uniform { rate: f64 },
    /// Spokes send most trips into the hub; the hub sends a trickle back out.
    /// `spoke_skew` alternates spoke rates between `(1+skew)` and `(1-skew)`.
    HubAndSpoke { hub: usize, spoke_rate: f64, hub_rate: f64, to_hub_share: f64, spoke_skew: f64 },
    /// Residential origins ramp up to a mid-episode peak and head mostly to business zones.
    MorningRush { residential: Vec<usize>, business: Vec<usize>, residential_rate: f64, other_rate: f64 },
    /// `rates[i][j]` requests per epoch, constant over time.
    CustomMatrix { rates: Vec<Vec<f64>> },
}

impl DemandPattern {
    /// Profile with default parameters for `name`.
    pub fn from_name(name: &str, cfg: &ScenarioConfig) -> Result<Self, DemandError> {
        let zones = cfg.zone_count;
        match name {
            "uniform" => Ok(DemandPattern::Uniform { rate: 2.0 }),
            "hub-and-spoke" => Ok(DemandPattern::HubAndSpoke {
                hub: central_zone(cfg),
                spoke_rate: 3.0,
                hub_rate: 0.5,
                to_hub_share: 0.7,
                spoke_skew: 0.5,
            }),
            "morning-rush" => {
                let residential: Vec<usize> = (0..zones).filter(|z| z % 2 == 0).collect();
                let business: Vec<usize> = (0..zones).filter(|z| z % 2 == 1).collect();
                Ok(DemandPattern::MorningRush { residential, business, residential_rate: 3.0, other_rate: 0.4 })
            }
            "custom-matrix" => Err(DemandError::UnknownProfile("custom-matrix needs an explicit rate matrix".into())),
            other => Err(DemandError::UnknownProfile(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DemandPattern::Uniform { .. } => "uniform",
            DemandPattern::HubAndSpoke { .. } => "hub-and-spoke",
            DemandPattern::MorningRush { .. } => "morning-rush",
            DemandPattern::CustomMatrix { .. } => "custom-matrix",
        }
    }

    pub fn validate(&self, zones: usize) -> Result<(), DemandError> {
        let bad = |m: &str| Err(DemandError::InvalidPattern(m.to_string()));
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        match self {
            DemandPattern::Uniform { rate } if !rate_ok(*rate) => bad("rate must be finite and nonnegative"),
            DemandPattern::HubAndSpoke { hub, spoke_rate, hub_rate, to_hub_share, spoke_skew } => {
                if *hub >= zones {
                    bad("hub outside zone range")
                } else if !rate_ok(*spoke_rate) || !rate_ok(*hub_rate) {
                    bad("rates must be finite and nonnegative")
                } else if !(0.0..=1.0).contains(to_hub_share) || !(0.0..=1.0).contains(spoke_skew) {
                    bad("to_hub_share and spoke_skew must lie in [0, 1]")
                } else {
                    Ok(())
                }
            }
            DemandPattern::MorningRush { residential, business, residential_rate, other_rate } => {
                if residential.iter().chain(business).any(|&z| z >= zones) {
                    bad("zone outside range")
                } else if !rate_ok(*residential_rate) || !rate_ok(*other_rate) {
                    bad("rates must be finite and nonnegative")
                } else {
                    Ok(())
                }
            }
            DemandPattern::CustomMatrix { rates } => {
                if rates.len() != zones || rates.iter().any(|r| r.len() != zones) {
                    bad("rate matrix must be zones x zones")
                } else if rates.iter().flatten().any(|r| !rate_ok(*r)) {
                    bad("rates must be finite and nonnegative")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Expected requests for each (origin, dest) in `epoch` of an episode of `episode_epochs`.
    pub fn rates(&self, zones: usize, epoch: usize, episode_epochs: usize) -> Array2<f64> {
        let mut r = Array2::zeros((zones, zones));
        match self {
            DemandPattern::Uniform { rate } => r.fill(rate / zones as f64),
            DemandPattern::HubAndSpoke { hub, spoke_rate, hub_rate, to_hub_share, spoke_skew } => {
                let spokes: Vec<usize> = (0..zones).filter(|z| z != hub).collect();
                for (k, &s) in spokes.iter().enumerate() {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let origin_rate = spoke_rate * (1.0 + sign * spoke_skew);
                    r[[s, *hub]] += origin_rate * to_hub_share;
                    let rest = origin_rate * (1.0 - to_hub_share) / spokes.len() as f64;
                    for &d in &spokes {
                        r[[s, d]] += rest;
                    }
                }
                if spokes.is_empty() {
                    r[[*hub, *hub]] = *hub_rate;
                } else {
                    for &d in &spokes {
                        r[[*hub, d]] += hub_rate / spokes.len() as f64;
                    }
                }
            }
            DemandPattern::MorningRush { residential, business, residential_rate, other_rate } => {
                let phase = (epoch as f64 + 0.5) / episode_epochs.max(1) as f64;
                let intensity = 0.5 + (std::f64::consts::PI * phase).sin();
                for i in 0..zones {
                    if residential.contains(&i) {
                        let total = residential_rate * intensity;
                        let to_business = if business.is_empty() { 0.0 } else { 0.8 };
                        for &b in business {
                            r[[i, b]] += total * to_business / business.len() as f64;
                        }
                        for j in 0..zones {
                            r[[i, j]] += total * (1.0 - to_business) / zones as f64;
                        }
                    } else {
                        for j in 0..zones {
                            r[[i, j]] += other_rate * intensity / zones as f64;
                        }
                    }
                }
            }
            DemandPattern::CustomMatrix { rates } => {
                for i in 0..zones {
                    for j in 0..zones {
                        r[[i, j]] = rates[i][j];
                    }
                }
            }
        }
        r
    }
}

/// Zone whose centroid is closest to the centroid of all zones.
pub fn central_zone(cfg: &ScenarioConfig) -> usize {
    let pts = ZoneLayout::from_config(cfg).centroids();
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (z, p) in pts.iter().enumerate() {
        let d = (p[0] - cx).hypot(p[1] - cy);
        if d < best_d - 1e-9 {
            best = z;
            best_d = d;
        }
    }
    best
}

/// Poisson arrivals per (origin, dest, epoch), one rider per request, times
/// uniform inside the epoch. Deterministic in `(cfg, pattern, rng seed)`.
pub fn generate_scenario_demand(
    cfg: &ScenarioConfig,
    pattern: &DemandPattern,
    rng: &Rng,
) -> Result<RequestStream, DemandError> {
    pattern.validate(cfg.zone_count)?;
    let mut stream = rng.substream(rng::DEMAND);
    let zones = cfg.zone_count;
    let mut raw = Vec::new();
    for epoch in 0..cfg.episode_epochs {
        let rates = pattern.rates(zones, epoch, cfg.episode_epochs);
        let start = epoch as u64 * cfg.epoch_seconds;
        for i in 0..zones {
            for j in 0..zones {
                let rate = rates[[i, j]];
                if rate <= 0.0 {
                    continue;
                }
                let n = Poisson::new(rate).map_err(|e| DemandError::InvalidPattern(e.to_string()))?.sample(&mut stream) as u64;
                for _ in 0..n {
                    let t = start + stream.random_range(0..cfg.epoch_seconds);
                    raw.push((t, i, j));
                }
            }
        }
    }
    raw.sort();
    let requests = raw
        .into_iter()
        .enumerate()
        .map(|(id, (time_s, origin, dest))| Request { id: id as u64, origin, dest, time_s, riders: 1 })
        .collect();
    Ok(RequestStream { requests })
}

/// Percentage drawn from U(-5, 5).
pub fn draw_perturbation_pct(rng: &mut Stream) -> f64 {
    rng.random_range(-5.0..5.0)
}

/// Add (pct > 0) or delete (pct < 0) `round(|pct|% of n)` requests. Added
/// requests copy the zones of a random existing request and get a fresh time
/// inside that request's epoch.
pub fn perturb_stream(stream: &RequestStream, pct: f64, epoch_seconds: u64, rng: &mut Stream) -> RequestStream {
    let n = stream.len();
    let count = round_half_up(pct.abs() / 100.0 * n as f64) as usize;
    let mut kept: Vec<Request> = stream.requests.clone();
    if pct < 0.0 {
        let drop: std::collections::BTreeSet<usize> = sample(rng, n, count.min(n)).into_iter().collect();
        kept = kept.into_iter().enumerate().filter(|(k, _)| !drop.contains(k)).map(|(_, r)| r).collect();
    } else if n > 0 {
        for _ in 0..count {
            let template = stream.requests[rng.random_range(0..n)];
            let epoch_start = template.time_s / epoch_seconds * epoch_seconds;
            kept.push(Request { time_s: epoch_start + rng.random_range(0..epoch_seconds), ..template });
        }
    }
    kept.sort_by_key(|r| (r.time_s, r.origin, r.dest, r.id));
    for (id, r) in kept.iter_mut().enumerate() {
        r.id = id as u64;
    }
    RequestStream { requests: kept }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(zones: usize, epochs: usize) -> ScenarioConfig {
        ScenarioConfig { zone_count: zones, grid_columns: zones.min(3), episode_epochs: epochs, ..Default::default() }
    }

    #[test]
    fn zero_rate_is_empty() {
        let s = generate_scenario_demand(&cfg(3, 4), &DemandPattern::Uniform { rate: 0.0 }, &Rng::new(1)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn uniform_mean_matches_poisson() {
        // 2 zones x 4 epochs x 2.0 => mean 16, variance 16.
        let c = cfg(2, 4);
        let runs = 1000;
        let total: usize = (0..runs)
            .map(|seed| generate_scenario_demand(&c, &DemandPattern::Uniform { rate: 2.0 }, &Rng::new(seed)).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        let sigma_of_mean = (16.0f64 / runs as f64).sqrt();
        assert!((mean - 16.0).abs() < 3.0 * sigma_of_mean, "mean {mean}");
    }

    #[test]
    fn morning_rush_originates_in_residential_zones() {
        let c = cfg(6, 12);
        let pattern = DemandPattern::from_name("morning-rush", &c).unwrap();
        let DemandPattern::MorningRush { residential, .. } = &pattern else { unreachable!() };
        let s = generate_scenario_demand(&c, &pattern, &Rng::new(5)).unwrap();
        let from_res = s.requests.iter().filter(|r| residential.contains(&r.origin)).count();
        assert!(from_res as f64 >= 0.7 * s.len() as f64, "{from_res}/{}", s.len());
    }

    #[test]
    fn deterministic_and_ordered() {
        let c = cfg(6, 6);
        let p = DemandPattern::from_name("hub-and-spoke", &c).unwrap();
        let a = generate_scenario_demand(&c, &p, &Rng::new(9)).unwrap();
        let b = generate_scenario_demand(&c, &p, &Rng::new(9)).unwrap();
        assert_eq!(a, b);
        a.validate(6).unwrap();
        assert!(a.requests.iter().all(|r| r.time_s < c.episode_seconds()));
    }

    #[test]
    fn unknown_profile() {
        assert!(matches!(DemandPattern::from_name("rainy-day", &cfg(2, 2)), Err(DemandError::UnknownProfile(_))));
    }

    #[test]
    fn hub_is_grid_center() {
        let c = ScenarioConfig { zone_count: 9, grid_columns: 3, ..Default::default() };
        assert_eq!(central_zone(&c), 4);
    }

    #[test]
    fn perturbation_counts() {
        let base = generate_scenario_demand(&cfg(2, 30), &DemandPattern::Uniform { rate: 2.0 }, &Rng::new(3)).unwrap();
        let base = RequestStream { requests: base.requests[..100].to_vec() };
        let mut r = Rng::new(4).substream(rng::PERTURBATION);
        assert_eq!(perturb_stream(&base, 5.0, 300, &mut r).len(), 105);
        assert_eq!(perturb_stream(&base, -5.0, 300, &mut r).len(), 95);
        assert_eq!(perturb_stream(&base, 0.0, 300, &mut r).len(), 100);
        for _ in 0..100 {
            let p = draw_perturbation_pct(&mut r);
            assert!((-5.0..=5.0).contains(&p));
        }
    }
}
