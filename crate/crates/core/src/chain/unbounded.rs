//! Batch-size chain of the unbounded grab-all queue.
//!
//! With `A_n` jobs arriving during the n-th batch, the next batch has
//! `max(A_n, 1)` jobs; given `B_n = b` and deterministic service,
//! `A_n ~ Poisson(lambda * tau(b))`.

use super::matrix::StochasticMatrix;
use super::poisson::PoissonSpan;
use super::{adaptive, upper_tail_mass, ChainSolution, SolveOptions};
use crate::bounds;
use crate::error::{Error, Result};
use crate::model::{BatchLimit, EnergyModel, LinearServiceModel, ServiceLaw};

/// `Pr(A = k | B = b)`: probability that `k` jobs arrive while a batch of `b`
/// is served. Only the deterministic law is supported, where the mixing
/// integral reduces to a Poisson pmf with mean `lambda * tau(b)`.
pub fn a_pmf(b: u64, k: u64, lambda: f64, law: &ServiceLaw) -> Result<f64> {
    let ServiceLaw::DeterministicLinear { model } = law else {
        return Err(Error::UnsupportedLaw(format!(
            "arrival-count pmf is only available for deterministic service, got {}",
            law.name()
        )));
    };
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("invalid lambda {lambda}")));
    }
    Ok(super::poisson::poisson_pmf(lambda * model.tau_of(b)?, k))
}

fn check_stable(lambda: f64, model: &LinearServiceModel) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    crate::model::check_stable(lambda, model, BatchLimit::Unbounded)
}

/// Transition matrix of the batch-size chain truncated to `b = 1..=trunc`.
///
/// Index `i` holds batch size `i + 1`. Column 0 collects `a_0 + a_1`, column
/// `j - 1` holds `a_j`, and the last column additionally absorbs
/// `Pr(A >= trunc)`.
pub fn build_p(lambda: f64, model: &LinearServiceModel, trunc: usize) -> Result<StochasticMatrix> {
    check_stable(lambda, model)?;
    if trunc < 2 {
        return Err(Error::Domain(format!("truncation level must be at least 2, got {trunc}")));
    }
    let rows = (1..=trunc as u64)
        .map(|b| {
            let span = PoissonSpan::new(lambda * model.tau(b));
            batch_row(&span, trunc)
        })
        .collect();
    Ok(StochasticMatrix::from_spans(rows))
}

/// Maps an arrival-count distribution onto next-batch-size columns.
fn batch_row(a: &PoissonSpan, trunc: usize) -> (usize, Vec<f64>) {
    let last = trunc - 1;
    // next batch size max(A, 1) sits at column max(A, 1) - 1
    let col_of = |k: usize| k.max(1) - 1;
    let lo = col_of(a.lo).min(last);
    let hi = (col_of(a.end() - 1) + 1).min(trunc);
    let mut vals = vec![0.0; hi - lo];
    for k in a.lo..a.end() {
        let c = col_of(k);
        if c >= last {
            break;
        }
        vals[c - lo] += a.pmf(k);
    }
    let tail = a.sf(trunc);
    if tail > 0.0 {
        if hi < trunc {
            vals.resize(trunc - lo, 0.0);
        }
        *vals.last_mut().expect("non-empty row") += tail;
    }
    (lo, vals)
}

/// Solves the unbounded queue.
///
/// The truncation level starts at `max(64, ceil(4 lambda tau0 / (1 - rho)))`
/// and doubles until the stationary mass above 90% of it is below
/// `opts.tol`. Latency follows from the batch-size moments, the idle
/// probability from the utilization identity
/// `1 - pi0 = lambda alpha + lambda tau0 / E[B]`.
pub fn solve_unbounded(
    lambda: f64,
    model: &LinearServiceModel,
    energy: Option<&EnergyModel>,
    opts: &SolveOptions,
) -> Result<ChainSolution> {
    check_stable(lambda, model)?;
    let rho = lambda * model.alpha();
    let start = ((4.0 * lambda * model.tau0() / (1.0 - rho)).ceil() as usize).max(64);
    let (pi, trunc, tail) = adaptive(start, opts, |trunc| {
        let pi = build_p(lambda, model, trunc)?.stationary()?;
        let tail = upper_tail_mass(&pi);
        Ok((pi, tail))
    })?;

    let (mut eb, mut eb2, mut p_a0) = (0.0, 0.0, 0.0);
    for (i, &p) in pi.iter().enumerate() {
        let b = (i + 1) as f64;
        eb += p * b;
        eb2 += p * b * b;
        p_a0 += p * (-lambda * model.tau((i + 1) as u64)).exp();
    }
    let pi0 = 1.0 - rho - lambda * model.tau0() / eb;
    let ew = bounds::ew_from_batch_moments(lambda, model, eb, eb2)?;
    let eta = energy.map(|e| bounds::eta_from_eb(e, eb)).transpose()?;
    Ok(ChainSolution {
        lambda,
        b_max: BatchLimit::Unbounded,
        stationary_b: pi,
        eb,
        eb2,
        p_a0,
        pi0,
        el: lambda * ew,
        ew,
        eta,
        trunc_level: trunc,
        tail_mass_bound: tail,
    })
}

/// Point evaluation of the probability generating function of the number of
/// jobs in the system at an arbitrary time, for `z` in `[0, 1)`:
///
/// `sum_b Pr(B=b)/E[B] * (1 - z^b)/(1 - z) * exp(lambda tau(b) (z - 1))`.
pub fn pgf_pi(
    z: f64,
    solution: &ChainSolution,
    lambda: f64,
    model: &LinearServiceModel,
) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("pgf argument must lie in [0, 1), got {z}")));
    }
    if solution.b_max != BatchLimit::Unbounded {
        return Err(Error::Domain("the pgf identity holds for unbounded batching only".into()));
    }
    let mut acc = 0.0;
    let mut zb = 1.0;
    for (i, &p) in solution.stationary_b.iter().enumerate() {
        zb *= z;
        let b = (i + 1) as u64;
        acc += p * (1.0 - zb) / (1.0 - z) * (lambda * model.tau(b) * (z - 1.0)).exp();
    }
    Ok(acc / solution.eb)
}
