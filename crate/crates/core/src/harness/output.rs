//! CSV and JSON serialization of sweep results and traces.
//!
//! Sweep CSV columns, in order: `algorithm, lambda, beta, p, n_train, seed,
//! trial, cell, train_risk, holdout_risk, test_risk, l1_error, support_count,
//! seconds, best_iteration, status`. Absent hyperparameters are empty fields.
//! Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::sweep::{Algorithm, ResultRecord, RunStatus};
use crate::trainer::TrainTrace;

pub fn write_records<W: Write>(writer: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Median of a nonempty sample (mean of the two central values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Test-risk statistics for one configuration across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub algorithm: Algorithm,
    pub n_train: usize,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub trials: usize,
    pub diverged: usize,
    pub test_risk_min: f64,
    pub test_risk_median: f64,
    pub test_risk_max: f64,
    pub support_count_median: f64,
    pub l1_error_median: f64,
}

/// Per sample size and algorithm, the configuration with the lowest median test risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best: Vec<ConfigSummary>,
    pub configurations: usize,
    pub runs: usize,
}

impl Summary {
    pub fn best_for(&self, algorithm: Algorithm, n_train: usize) -> Option<&ConfigSummary> {
        self.best.iter().find(|c| c.algorithm == algorithm && c.n_train == n_train)
    }
}

pub fn summarize(records: &[ResultRecord]) -> Summary {
    type Key = (usize, Algorithm, u64, Option<u64>, Option<u64>);
    let mut groups: BTreeMap<Key, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.n_train, r.algorithm, r.lambda.to_bits(), r.beta.map(f64::to_bits), r.p.map(f64::to_bits));
        groups.entry(key).or_default().push(r);
    }
    let configs: Vec<ConfigSummary> = groups
        .values()
        .map(|rs| {
            let test: Vec<f64> = rs.iter().map(|r| r.test_risk).collect();
            let support: Vec<f64> = rs.iter().map(|r| r.support_count as f64).collect();
            let l1: Vec<f64> = rs.iter().map(|r| r.l1_error).collect();
            ConfigSummary {
                algorithm: rs[0].algorithm,
                n_train: rs[0].n_train,
                lambda: rs[0].lambda,
                beta: rs[0].beta,
                p: rs[0].p,
                trials: rs.len(),
                diverged: rs.iter().filter(|r| r.status == RunStatus::Diverged).count(),
                test_risk_min: test.iter().copied().fold(f64::INFINITY, f64::min),
                test_risk_median: median(&test),
                test_risk_max: test.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                support_count_median: median(&support),
                l1_error_median: median(&l1),
            }
        })
        .collect();
    let mut best: BTreeMap<(usize, Algorithm), ConfigSummary> = BTreeMap::new();
    for c in &configs {
        let slot = best.entry((c.n_train, c.algorithm)).or_insert_with(|| c.clone());
        if c.test_risk_median < slot.test_risk_median {
            *slot = c.clone();
        }
    }
    Summary { best: best.into_values().collect(), configurations: configs.len(), runs: records.len() }
}

pub fn write_summary<W: Write>(writer: W, summary: &Summary) -> Result<()> {
    serde_json::to_writer_pretty(writer, summary)?;
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    train_risk: f64,
    holdout_risk: Option<f64>,
    excess_risk: Option<f64>,
    divergence_to_reference: Option<f64>,
}

/// Per-iteration trace as CSV: `iteration, train_risk, holdout_risk, excess_risk, divergence_to_reference`.
pub fn write_trace<W: Write, P>(writer: W, trace: &TrainTrace<P>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let at = |v: &Option<Vec<f64>>, i: usize| v.as_ref().and_then(|v| v.get(i).copied());
    for i in 0..trace.train_risk.len() {
        w.serialize(TraceRow {
            iteration: i + 1,
            train_risk: trace.train_risk[i],
            holdout_risk: at(&trace.holdout_risk, i),
            excess_risk: at(&trace.excess_risk, i),
            divergence_to_reference: at(&trace.divergence_to_reference, i),
        })?;
    }
    w.flush()?;
    Ok(())
}
