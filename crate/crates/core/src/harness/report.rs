use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::sim::Metrics;

/// Columns summarized per policy.
pub const REPORT_METRICS: [&str; 7] =
    ["served", "dropped", "discarded", "dropout_pct", "mean_wait_s", "relocations", "invariant_violations"];

fn metric(m: &Metrics, name: &str) -> f64 {
    match name {
        "served" => m.served as f64,
        "dropped" => m.dropped as f64,
        "discarded" => m.discarded as f64,
        "dropout_pct" => m.dropout_pct,
        "mean_wait_s" => m.mean_wait_s,
        "relocations" => m.relocations as f64,
        "invariant_violations" => m.invariant_violations as f64,
        other => unreachable!("unknown metric {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub scenario: String,
    pub policy: String,
    pub reference: String,
    pub metric: String,
    /// Seeds both policies were run on.
    pub n: usize,
    /// Mean of `policy - reference` over shared seeds.
    pub mean_delta: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// Mean, sample standard deviation and a two-sided 95% Student-t interval.
/// The interval is NaN with fewer than two values.
pub fn confidence_interval(values: &[f64]) -> (f64, f64, f64, f64) {
    let mean = values.mean();
    if values.len() < 2 {
        return (mean, f64::NAN, f64::NAN, f64::NAN);
    }
    let std = values.std_dev();
    let t = StudentsT::new(0.0, 1.0, (values.len() - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    let half = t * std / (values.len() as f64).sqrt();
    (mean, std, mean - half, mean + half)
}

/// One row per (policy, metric), policies in first-seen order.
pub fn summarize(scenario: &str, rows: &[Metrics]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.policy.as_str()) {
            order.push(&r.policy);
        }
    }
    let mut out = Vec::new();
    for policy in order {
        let mine: Vec<&Metrics> = rows.iter().filter(|r| r.policy == policy).collect();
        for name in REPORT_METRICS {
            let values: Vec<f64> = mine.iter().map(|m| metric(m, name)).collect();
            let (mean, std, ci95_low, ci95_high) = confidence_interval(&values);
            out.push(SummaryRow {
                scenario: scenario.to_string(),
                policy: policy.to_string(),
                metric: name.to_string(),
                n: values.len(),
                mean,
                std,
                ci95_low,
                ci95_high,
            });
        }
    }
    out
}

/// Per-seed differences against `reference`, over seeds both policies share.
pub fn paired_deltas(scenario: &str, rows: &[Metrics], reference: &str) -> Vec<PairedRow> {
    let by_seed: BTreeMap<u64, &Metrics> = rows.iter().filter(|r| r.policy == reference).map(|r| (r.seed, r)).collect();
    if by_seed.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.policy != reference) {
        if !order.contains(&r.policy.as_str()) {
            order.push(&r.policy);
        }
    }
    let mut out = Vec::new();
    for policy in order {
        let pairs: Vec<(&Metrics, &Metrics)> =
            rows.iter().filter(|r| r.policy == policy).filter_map(|r| by_seed.get(&r.seed).map(|b| (r, *b))).collect();
        for name in REPORT_METRICS {
            let deltas: Vec<f64> = pairs.iter().map(|(a, b)| metric(a, name) - metric(b, name)).collect();
            let (mean_delta, _, ci95_low, ci95_high) = confidence_interval(&deltas);
            out.push(PairedRow {
                scenario: scenario.to_string(),
                policy: policy.to_string(),
                reference: reference.to_string(),
                metric: name.to_string(),
                n: deltas.len(),
                mean_delta,
                ci95_low,
                ci95_high,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::METRICS_SCHEMA_VERSION;

    fn row(policy: &str, seed: u64, served: u64) -> Metrics {
        Metrics {
            schema_version: METRICS_SCHEMA_VERSION,
            policy: policy.into(),
            seed,
            arrivals: 100,
            served,
            dropped: 100 - served,
            discarded: 0,
            open: 0,
            dropout_pct: (100 - served) as f64,
            mean_wait_s: 60.0,
            relocations: 0,
            decisions: 24,
            invariant_violations: 0,
            router_budget_hits: 0,
        }
    }

    #[test]
    fn t_interval_by_hand() {
        // mean 2, sample sd 1, t(0.975, 2) = 4.302653
        let (mean, std, lo, hi) = confidence_interval(&[1.0, 2.0, 3.0]);
        assert_eq!((mean, std), (2.0, 1.0));
        let half = 4.302652729911275 / 3f64.sqrt();
        assert!((lo - (2.0 - half)).abs() < 1e-9 && (hi - (2.0 + half)).abs() < 1e-9);
        let (m, s, lo, _) = confidence_interval(&[5.0]);
        assert_eq!(m, 5.0);
        assert!(s.is_nan() && lo.is_nan());
    }

    #[test]
    fn pairs_by_seed() {
        let rows = vec![row("a", 1, 50), row("a", 2, 60), row("b", 2, 70), row("b", 1, 52), row("b", 9, 99)];
        let paired = paired_deltas("s", &rows, "a");
        let served = paired.iter().find(|p| p.metric == "served").unwrap();
        assert_eq!((served.policy.as_str(), served.n, served.mean_delta), ("b", 2, 6.0));
        let summary = summarize("s", &rows);
        assert_eq!(summary.len(), 2 * REPORT_METRICS.len());
        assert_eq!(summary.iter().find(|r| r.policy == "b" && r.metric == "served").unwrap().n, 3);
    }
}
