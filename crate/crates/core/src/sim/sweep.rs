use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{replicate, SimConfig, SimReport};
use crate::error::{Error, Result};
use crate::model::{check_stable, normalized_load};

/// One point of a load sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub rho: f64,
    pub report: SimReport,
}

/// Flat CSV record of a [`SweepRow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    pub rho: f64,
    pub mean_latency_ms: f64,
    pub ci99_ms: f64,
    pub utilization: f64,
    pub mean_batch: f64,
    pub eb2: f64,
    pub eta_jobs_per_mj: Option<f64>,
    pub jobs: u64,
}

impl From<&SweepRow> for SweepRecord {
    fn from(row: &SweepRow) -> Self {
        let r = &row.report;
        Self {
            lambda: row.lambda,
            rho: row.rho,
            mean_latency_ms: r.mean_latency.mean,
            ci99_ms: r.mean_latency.half_width,
            utilization: r.utilization.mean,
            mean_batch: r.mean_batch_size.mean,
            eb2: r.second_moment_batch,
            eta_jobs_per_mj: r.eta.map(|e| e.mean),
            jobs: r.jobs_measured,
        }
    }
}

/// Replicated simulation at each arrival rate, with `base` supplying
/// everything but `lambda`. Every rate is checked for stability before any
/// simulation starts. Rows come back in ascending `lambda`.
pub fn sweep(base: &SimConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let model = *base.queue.model();
    for &l in lambdas {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {l}")));
        }
        check_stable(l, &model, base.queue.b_max())?;
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|lambda| {
            let cfg = base.with_queue(base.queue.with_lambda(lambda)?);
            Ok(SweepRow { lambda, rho: normalized_load(lambda, &model), report: replicate(&cfg)? })
        })
        .collect()
}

/// Writes the header and one record per row.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "lambda",
        "rho",
        "mean_latency_ms",
        "ci99_ms",
        "utilization",
        "mean_batch",
        "eb2",
        "eta_jobs_per_mj",
        "jobs",
    ])?;
    for row in rows {
        w.serialize(SweepRecord::from(row))?;
    }
    w.flush()
}

pub fn write_sweep_json<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let records: Vec<SweepRecord> = rows.iter().map(SweepRecord::from).collect();
    serde_json::to_writer_pretty(out, &records)?;
    Ok(())
}
