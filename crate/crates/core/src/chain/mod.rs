//! Exact numerical stationary analysis for deterministic linear service.
//!
//! Two chains are solved:
//!
//! - with unbounded batching, the sequence of batch sizes is itself a Markov
//!   chain on `{1, 2, ...}` ([`solve_unbounded`]);
//! - with a finite cap, the queue length at departure epochs is used instead
//!   and time averages follow from a Markov-reward argument over departure
//!   cycles ([`solve_finite`]).
//!
//! Both are truncated with the overflow mass folded into the last state and
//! solved by GTH elimination; the truncation level doubles until the mass
//! near the top of the state space falls below the tolerance.

mod finite;
mod matrix;
pub mod order;
mod poisson;
mod unbounded;

use serde::{Deserialize, Serialize};

pub use finite::{build_departure_chain, solve_finite};
pub use matrix::{balance_residual, stationary, StochasticMatrix};
pub use poisson::poisson_pmf;
pub use unbounded::{a_pmf, build_p, pgf_pi, solve_unbounded};

use crate::error::{Error, Result};
use crate::model::{BatchLimit, EnergyModel, QueueConfig};

/// Truncation and convergence controls shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Required bound on the stationary mass above 90% of the truncation level.
    pub tol: f64,
    /// Largest truncation level tried before giving up.
    pub ceiling: usize,
    /// Overrides the first truncation level.
    pub initial_trunc: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, ceiling: 1 << 20, initial_trunc: None }
    }
}

/// Stationary solution with the derived moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSolution {
    pub lambda: f64,
    pub b_max: BatchLimit,
    /// `stationary_b[i] = Pr(B = i + 1)` for a batch drawn from the
    /// stationary batch sequence.
    pub stationary_b: Vec<f64>,
    pub eb: f64,
    pub eb2: f64,
    /// Probability that no job arrives during a stationary batch.
    #[serde(rename = "pA0")]
    pub p_a0: f64,
    pub pi0: f64,
    pub el: f64,
    pub ew: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub trunc_level: usize,
    pub tail_mass_bound: f64,
}

impl ChainSolution {
    pub fn utilization(&self) -> f64 {
        1.0 - self.pi0
    }

    /// `Pr(B > b)` for `b = 0, 1, ...`, one entry per stored state.
    pub fn batch_ccdf(&self) -> Vec<f64> {
        order::ccdf(&self.stationary_b)
    }

    /// JSON form with the stationary vector dropped when longer than
    /// `max_vector`; the moments are always present.
    pub fn to_json_value(&self, max_vector: usize) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("solution is serializable");
        if self.stationary_b.len() > max_vector {
            v["stationary_b"] = serde_json::Value::Null;
            v["stationary_b_len"] = serde_json::Value::from(self.stationary_b.len());
        }
        v
    }
}

/// Dispatches on the batch cap of `config`. Only the deterministic law has
/// an exact chain here; the others are simulator-only.
pub fn solve(
    config: &QueueConfig,
    energy: Option<&EnergyModel>,
    opts: &SolveOptions,
) -> Result<ChainSolution> {
    if !config.service().is_deterministic() {
        return Err(Error::UnsupportedLaw(format!(
            "the chain solver needs deterministic service, got {}",
            config.service().name()
        )));
    }
    match config.b_max() {
        BatchLimit::Unbounded => solve_unbounded(config.lambda(), config.model(), energy, opts),
        BatchLimit::Finite(b) => solve_finite(config.lambda(), config.model(), b, energy, opts),
    }
}

/// Mass of the states whose 1-based level exceeds `0.9 * trunc`.
pub(crate) fn upper_tail_mass(pi: &[f64]) -> f64 {
    let cut = (0.9 * pi.len() as f64).floor() as usize;
    pi[cut.min(pi.len())..].iter().sum()
}

/// Runs `attempt` at doubling truncation levels starting from `start` until
/// it reports an upper-tail mass below `opts.tol`.
pub(crate) fn adaptive<T>(
    start: usize,
    opts: &SolveOptions,
    mut attempt: impl FnMut(usize) -> Result<(T, f64)>,
) -> Result<(T, usize, f64)> {
    let mut level = opts.initial_trunc.unwrap_or(start).max(2).min(opts.ceiling.max(2));
    loop {
        let (value, tail) = attempt(level)?;
        if tail < opts.tol {
            return Ok((value, level, tail));
        }
        if level >= opts.ceiling {
            return Err(Error::Truncation { level: level * 2, ceiling: opts.ceiling, tail_mass: tail });
        }
        log::debug!("truncation {level}: tail mass {tail:e} above tolerance, doubling");
        level = (level * 2).min(opts.ceiling);
    }
}
