use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SimError;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// One episode's totals, written as one delimited row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub policy: String,
    pub seed: u64,
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    /// Priced out by a multiplier below 1.
    pub discarded: u64,
    pub open: u64,
    /// Dropped riders as a percentage of arrivals.
    pub dropout_pct: f64,
    pub mean_wait_s: f64,
    pub relocations: u64,
    pub decisions: u64,
    pub invariant_violations: u64,
    pub router_budget_hits: u64,
}

impl Metrics {
    pub fn is_balanced(&self) -> bool {
        self.served + self.dropped + self.discarded + self.open == self.arrivals
    }
}

pub fn write_metrics<W: Write>(rows: &[Metrics], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<Metrics>, SimError> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: Metrics = row?;
        if row.schema_version != METRICS_SCHEMA_VERSION {
            return Err(SimError::Format(format!("unsupported metrics schema_version {}", row.schema_version)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Per-epoch debugging record, written as JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub schema_version: u32,
    pub epoch: usize,
    pub idle: Vec<u32>,
    pub multipliers: Vec<f64>,
    pub relocations: u64,
    pub open: usize,
    pub served: u64,
    pub dropped: u64,
}

pub fn write_trace<W: Write>(trace: &[EpochTrace], mut out: W) -> Result<(), SimError> {
    for t in trace {
        serde_json::to_writer(&mut out, t).map_err(|e| SimError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = Metrics {
            schema_version: METRICS_SCHEMA_VERSION,
            policy: "none".into(),
            seed: 4,
            arrivals: 10,
            served: 6,
            dropped: 3,
            discarded: 1,
            open: 0,
            dropout_pct: 30.0,
            mean_wait_s: 171.5,
            relocations: 2,
            decisions: 24,
            invariant_violations: 0,
            router_budget_hits: 0,
        };
        let mut buf = Vec::new();
        write_metrics(&[m.clone(), m.clone()], &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("schema_version,policy,seed,"));
        assert_eq!(read_metrics(&buf[..]).unwrap(), vec![m.clone(), m]);
    }
}
