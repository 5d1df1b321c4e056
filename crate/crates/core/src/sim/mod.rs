//! Seeded discrete-event simulation of the grab-all batching queue.
//!
//! Each replication draws from its own ChaCha8 stream, selected by the
//! replication index on top of the configured seed, so results do not depend
//! on the order in which replications execute. Replications run in parallel
//! and are aggregated in index order.

mod engine;
mod stats;
mod sweep;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use stats::{student_t_quantile, Estimate};
pub use sweep::{sweep, write_sweep_csv, write_sweep_json, SweepRecord, SweepRow};

use crate::error::{Error, Result};
use crate::model::{BatchLimit, EnergyModel, QueueConfig};
use engine::RunStats;

pub const CI_LEVEL: f64 = 0.99;
/// Batch-means groups for single-replication confidence intervals.
pub const BATCH_MEANS_GROUPS: usize = 32;
pub const DEFAULT_QUEUE_CAP: u64 = 1 << 32;
pub const DEFAULT_MEASURED_JOBS: u64 = 1_000_000;
pub const DEFAULT_REPLICATIONS: u32 = 20;
pub const MIN_WARMUP_JOBS: u64 = 10_000;

/// One simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub queue: QueueConfig,
    #[serde(default)]
    pub energy: Option<EnergyModel>,
    /// Departures discarded before measuring; `None` uses [`default_warmup`].
    #[serde(default)]
    pub warmup_jobs: Option<u64>,
    pub measured_jobs: u64,
    pub seed: u64,
    pub replications: u32,
    /// Hard cap on waiting jobs; exceeding it aborts the run.
    pub queue_cap: u64,
}

impl SimConfig {
    pub fn new(queue: QueueConfig) -> Self {
        Self {
            queue,
            energy: None,
            warmup_jobs: None,
            measured_jobs: DEFAULT_MEASURED_JOBS,
            seed: 0,
            replications: DEFAULT_REPLICATIONS,
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }

    pub fn with_energy(mut self, energy: EnergyModel) -> Self {
        self.energy = Some(energy);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_measured_jobs(mut self, jobs: u64) -> Self {
        self.measured_jobs = jobs;
        self
    }

    pub fn with_warmup_jobs(mut self, jobs: u64) -> Self {
        self.warmup_jobs = Some(jobs);
        self
    }

    pub fn with_replications(mut self, replications: u32) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_queue_cap(mut self, cap: u64) -> Self {
        self.queue_cap = cap;
        self
    }

    pub fn with_queue(&self, queue: QueueConfig) -> Self {
        Self { queue, ..self.clone() }
    }

    pub fn resolved_warmup(&self) -> u64 {
        self.warmup_jobs.unwrap_or_else(|| default_warmup(&self.queue))
    }

    fn validate(&self) -> Result<()> {
        if self.measured_jobs == 0 {
            return Err(Error::Domain("measured_jobs must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default warmup: `max(1e4, 100 * tau(b_bar) * lambda)` departures, where
/// `b_bar = max(1, lambda tau0 / (1 - rho))` (capped at `b_max`) estimates
/// the typical batch. This is a hundred typical batch times worth of
/// arrivals, which matters because the server is saturated at moderate load.
pub fn default_warmup(queue: &QueueConfig) -> u64 {
    let m = queue.model();
    let lambda = queue.lambda();
    let rho = lambda * m.alpha();
    let mut b_bar = (lambda * m.tau0() / (1.0 - rho)).max(1.0);
    if let BatchLimit::Finite(cap) = queue.b_max() {
        b_bar = b_bar.min(cap as f64);
    }
    let jobs = 100.0 * (m.alpha() * b_bar + m.tau0()) * lambda;
    (jobs.ceil() as u64).max(MIN_WARMUP_JOBS)
}

/// Simulated estimates. Half-widths are for 99% confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Mean sojourn time (arrival to batch departure) in ms.
    pub mean_latency: Estimate,
    /// Time-average number of jobs in the system.
    pub mean_queue_length: Estimate,
    /// Fraction of time the server is busy.
    pub utilization: Estimate,
    pub mean_batch_size: Estimate,
    pub batch_size_histogram: BTreeMap<u64, u64>,
    pub second_moment_batch: f64,
    /// Jobs per millijoule; present iff an energy model was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Estimate>,
    pub jobs_measured: u64,
    pub batches_measured: u64,
    pub warmup_jobs: u64,
    pub seed: u64,
    pub replications: u32,
}

/// Runs a single replication (stream 0 of `config.seed`), with batch-means
/// confidence intervals over [`BATCH_MEANS_GROUPS`] contiguous groups.
pub fn run(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let stats = engine::simulate(config, 0)?;
    Ok(stats.single_report(config))
}

/// Runs `config.replications` independent replications and aggregates the
/// replication means with a Student-t interval. One replication falls back
/// to [`run`].
pub fn replicate(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    if config.replications == 1 {
        return run(config);
    }
    let runs: Vec<RunStats> = (0..config.replications as u64)
        .into_par_iter()
        .map(|i| engine::simulate(config, i))
        .collect::<Result<_>>()?;
    Ok(RunStats::replicated_report(&runs, config))
}

/// Largest `CCDF_low(b) - CCDF_high(b)` between two batch-size histograms.
/// A value at or below zero means the first histogram is stochastically
/// smaller. Returns NaN if either histogram is empty.
pub fn dominance_check(hist_low: &BTreeMap<u64, u64>, hist_high: &BTreeMap<u64, u64>) -> f64 {
    let n_low: u64 = hist_low.values().sum();
    let n_high: u64 = hist_high.values().sum();
    if n_low == 0 || n_high == 0 {
        return f64::NAN;
    }
    let sizes: std::collections::BTreeSet<u64> =
        hist_low.keys().chain(hist_high.keys()).copied().collect();
    // Walk sizes ascending, tracking mass at or below b.
    let (mut below_low, mut below_high) = (0u64, 0u64);
    let mut worst: f64 = 0.0;
    for b in sizes {
        below_low += hist_low.get(&b).copied().unwrap_or(0);
        below_high += hist_high.get(&b).copied().unwrap_or(0);
        let ccdf_low = 1.0 - below_low as f64 / n_low as f64;
        let ccdf_high = 1.0 - below_high as f64 / n_high as f64;
        worst = worst.max(ccdf_low - ccdf_high);
    }
    worst
}

/// Dvoretzky-Kiefer-Wolfowitz radius `sqrt(ln(2/alpha) / (2n))`: with
/// probability `1 - alpha` an i.i.d. empirical CDF of `n` samples is within
/// this distance of the true CDF everywhere.
pub fn dkw_bound(n: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
