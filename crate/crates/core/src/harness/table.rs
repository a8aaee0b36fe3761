use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::MethodOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCategory {
    /// Rejected the null (at any time).
    Rejection,
    /// Stopped early without rejecting.
    Futility,
    /// Ran to the permutation budget without rejecting.
    Horizon,
}

impl StopCategory {
    pub fn of(outcome: &MethodOutcome, horizon: u64) -> Self {
        if outcome.rejected {
            StopCategory::Rejection
        } else if outcome.stop_time < horizon {
            StopCategory::Futility
        } else {
            StopCategory::Horizon
        }
    }
}

/// Summary of one method over `m` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub mu: Option<f64>,
    pub m: u64,
    pub horizon: u64,
    pub power: f64,
    pub mean_stop: f64,
    pub median_stop: f64,
    /// Mean stopping time among rejections.
    pub tau1: Option<f64>,
    /// Mean stopping time among early non-rejecting stops.
    pub tau0: Option<f64>,
    pub m1: u64,
    pub m0: u64,
}

impl TableRow {
    /// `(tau1 m1 + tau0 m0 + T (m - m1 - m0)) / m`.
    pub fn identity_mean(&self) -> f64 {
        let part = |tau: Option<f64>, k: u64| tau.map_or(0.0, |t| t * k as f64);
        (part(self.tau1, self.m1) + part(self.tau0, self.m0) + (self.horizon * (self.m - self.m1 - self.m0)) as f64)
            / self.m as f64
    }
}

/// Aggregates the outcomes of one method.
pub fn aggregate(label: &str, mu: Option<f64>, horizon: u64, outcomes: &[MethodOutcome]) -> TableRow {
    let m = outcomes.len() as u64;
    let (mut m1, mut m0, mut s1, mut s0, mut total) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for o in outcomes {
        total += o.stop_time;
        match StopCategory::of(o, horizon) {
            StopCategory::Rejection => {
                m1 += 1;
                s1 += o.stop_time;
            }
            StopCategory::Futility => {
                m0 += 1;
                s0 += o.stop_time;
            }
            StopCategory::Horizon => {}
        }
    }
    let mut times: Vec<u64> = outcomes.iter().map(|o| o.stop_time).collect();
    times.sort_unstable();
    let median = match times.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => times[n / 2] as f64,
        n => (times[n / 2 - 1] + times[n / 2]) as f64 / 2.0,
    };
    let mean = |s: u64, k: u64| (k > 0).then(|| s as f64 / k as f64);
    TableRow {
        label: label.to_string(),
        mu,
        m,
        horizon,
        power: if m == 0 { f64::NAN } else { m1 as f64 / m as f64 },
        mean_stop: mean(total, m).unwrap_or(f64::NAN),
        median_stop: median,
        tau1: mean(s1, m1),
        tau0: mean(s0, m0),
        m1,
        m0,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<TableRow>,
}

impl ExperimentTable {
    pub fn row(&self, label: &str, mu: Option<f64>) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label && r.mu == mu)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(rejected: bool, t: u64) -> MethodOutcome {
        MethodOutcome {
            rejected,
            stop_time: t,
            stop_reason: String::new(),
            p_value: 1.0,
            e_value: None,
            losses: 0,
        }
    }

    #[test]
    fn all_reject() {
        let row = aggregate("x", None, 100, &vec![outcome(true, 10); 7]);
        assert_eq!((row.power, row.mean_stop, row.tau1, row.m0), (1.0, 10.0, Some(10.0), 0));
    }

    #[test]
    fn none_stop() {
        let row = aggregate("x", None, 100, &vec![outcome(false, 100); 4]);
        assert_eq!((row.mean_stop, row.m1, row.m0), (100.0, 0, 0));
        assert_eq!(row.identity_mean(), 100.0);
    }

    #[test]
    fn mixed_identity() {
        let outs: Vec<_> = (0..37u64)
            .map(|i| match i % 3 {
                0 => outcome(true, 3 + i),
                1 => outcome(false, 5 + i),
                _ => outcome(false, 100),
            })
            .collect();
        let row = aggregate("x", Some(0.1), 100, &outs);
        assert!((row.identity_mean() - row.mean_stop).abs() < 1e-12);
        assert_eq!(row.median_stop, {
            let mut t: Vec<u64> = outs.iter().map(|o| o.stop_time).collect();
            t.sort();
            t[18] as f64
        });
    }

    #[test]
    fn csv_round_trip() {
        let row = aggregate("x", Some(0.2), 100, &[outcome(true, 10), outcome(false, 100)]);
        let table = ExperimentTable { rows: vec![row.clone()] };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let back: TableRow = r.deserialize().next().unwrap().unwrap();
        assert_eq!(back.label, row.label);
        assert_eq!(back.tau0, None);
        assert_eq!(back.mean_stop, row.mean_stop);
    }
}
