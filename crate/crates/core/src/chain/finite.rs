//! Departure-epoch chain for a finite maximum batch size.
//!
//! State `q` is the number of jobs left behind by a departing batch. From
//! `q = 0` the server idles for an `Exp(lambda)` time and serves the next
//! arrival alone; from `q >= 1` it serves `B(q) = min(q, b_max)` jobs. The
//! next state is `q - B(q) + A` with `A ~ Poisson(lambda tau(B(q)))`.
//!
//! Time averages come from rewards per departure cycle: cycle length
//! `1{q = 0}/lambda + tau(B(q))`, busy time `tau(B(q))`, and the integral of
//! the number in system `q tau + lambda tau^2 / 2` (with `q = 1` and
//! `tau = tau(1)` for the idle start).

use super::matrix::StochasticMatrix;
use super::poisson::PoissonSpan;
use super::{adaptive, upper_tail_mass, ChainSolution, SolveOptions};
use crate::bounds;
use crate::error::{Error, Result};
use crate::model::{check_stable, BatchLimit, EnergyModel, LinearServiceModel};

fn batch_of(q: usize, b_max: u64) -> u64 {
    if q == 0 {
        1
    } else {
        (q as u64).min(b_max)
    }
}

/// Departure-epoch transition matrix on `q = 0..qtrunc`, with transitions
/// beyond the last state folded into it.
pub fn build_departure_chain(
    lambda: f64,
    model: &LinearServiceModel,
    b_max: u64,
    qtrunc: usize,
) -> Result<StochasticMatrix> {
    if qtrunc < 2 {
        return Err(Error::Domain(format!("truncation level must be at least 2, got {qtrunc}")));
    }
    let last = qtrunc - 1;
    let mut rows = Vec::with_capacity(qtrunc);
    let mut cache: Option<(u64, PoissonSpan)> = None;
    for q in 0..qtrunc {
        let b = batch_of(q, b_max);
        // rows with q >= b_max share one arrival distribution
        if cache.as_ref().is_none_or(|(cb, _)| *cb != b) {
            cache = Some((b, PoissonSpan::new(lambda * model.tau(b))));
        }
        let a = &cache.as_ref().expect("just filled").1;
        let base = if q == 0 { 0 } else { q - b as usize };
        let lo = (base + a.lo).min(last);
        let hi = (base + a.end()).min(qtrunc);
        let mut vals = vec![0.0; hi - lo];
        for k in a.lo..a.end() {
            let c = base + k;
            if c >= last {
                break;
            }
            vals[c - lo] += a.pmf(k);
        }
        let tail = a.sf(last - base);
        if tail > 0.0 {
            vals.resize(qtrunc - lo, 0.0);
            *vals.last_mut().expect("non-empty row") += tail;
        }
        rows.push((lo, vals));
    }
    Ok(StochasticMatrix::from_spans(rows))
}

/// Solves the queue with maximum batch size `b_max`.
///
/// Rejects `lambda >= b_max / tau(b_max)`. The truncation level starts at
/// `max(64, ceil(4 lambda tau0 / (1 - lambda alpha)))` and doubles as in the
/// unbounded solver. `stationary_b` is the distribution of `B(q)` under the
/// departure-epoch distribution, i.e. the stationary batch-size law.
pub fn solve_finite(
    lambda: f64,
    model: &LinearServiceModel,
    b_max: u64,
    energy: Option<&EnergyModel>,
    opts: &SolveOptions,
) -> Result<ChainSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let limit = BatchLimit::finite(b_max)?;
    check_stable(lambda, model, limit)?;
    let rho = lambda * model.alpha();
    let start = ((4.0 * lambda * model.tau0() / (1.0 - rho)).ceil() as usize).max(64);
    let (pi, qtrunc, tail) = adaptive(start, opts, |qtrunc| {
        let pi = build_departure_chain(lambda, model, b_max, qtrunc)?.stationary()?;
        let tail = upper_tail_mass(&pi);
        Ok((pi, tail))
    })?;

    let max_batch = batch_of(qtrunc - 1, b_max) as usize;
    let mut stationary_b = vec![0.0; max_batch];
    let (mut cycle, mut busy, mut area) = (0.0, 0.0, 0.0);
    let (mut eb, mut eb2, mut p_a0) = (0.0, 0.0, 0.0);
    for (q, &p) in pi.iter().enumerate() {
        let b = batch_of(q, b_max);
        let tau = model.tau(b);
        let idle = if q == 0 { 1.0 / lambda } else { 0.0 };
        let in_system = if q == 0 { 1.0 } else { q as f64 };
        cycle += p * (idle + tau);
        busy += p * tau;
        area += p * (in_system * tau + 0.5 * lambda * tau * tau);
        let bf = b as f64;
        eb += p * bf;
        eb2 += p * bf * bf;
        p_a0 += p * (-lambda * tau).exp();
        stationary_b[b as usize - 1] += p;
    }
    let el = area / cycle;
    let ew = el / lambda;
    let utilization = busy / cycle;
    let eta = energy.map(|e| bounds::eta_from_eb(e, eb)).transpose()?;
    Ok(ChainSolution {
        lambda,
        b_max: limit,
        stationary_b,
        eb,
        eb2,
        p_a0,
        pi0: 1.0 - utilization,
        el,
        ew,
        eta,
        trunc_level: qtrunc,
        tail_mass_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::solve_unbounded;

    fn v100() -> LinearServiceModel {
        LinearServiceModel::new(0.1438, 1.8874).unwrap()
    }

    fn pk_md1(lambda: f64, tau1: f64) -> f64 {
        tau1 + lambda * tau1 * tau1 / (2.0 * (1.0 - lambda * tau1))
    }

    #[test]
    fn rows_are_stochastic() {
        let p = build_departure_chain(2.0, &v100(), 8, 100).unwrap();
        for i in 0..p.dim() {
            assert!((p.row_sum(i) - 1.0).abs() < 1e-13, "row {i}");
        }
        assert!(build_departure_chain(2.0, &v100(), 8, 1).is_err());
    }

    #[test]
    fn single_job_batches_match_pollaczek_khinchine() {
        let m = v100();
        let s = solve_finite(0.2, &m, 1, None, &SolveOptions::default()).unwrap();
        let pk = pk_md1(0.2, m.tau(1));
        assert!((pk - 2.7260554028563733).abs() < 1e-12);
        assert!(((s.ew - pk) / pk).abs() < 1e-9, "{} vs {pk}", s.ew);
        assert!((s.eb - 1.0).abs() < 1e-12);
        assert!((s.utilization() - 0.2 * m.tau(1)).abs() < 1e-9);
    }

    #[test]
    fn matches_independent_dense_solve() {
        // numpy dense solve, b_max = 8, lambda = 1.5, 400 states
        let s = solve_finite(1.5, &v100(), 8, None, &SolveOptions::default()).unwrap();
        assert!(((s.ew - 3.778938647967468) / s.ew).abs() < 1e-9, "{}", s.ew);
        assert!((s.utilization() - 0.9921162078951937).abs() < 1e-9);
        assert!((s.eb - 3.646369010861995).abs() < 1e-8);
    }

    #[test]
    fn large_cap_converges_to_unbounded() {
        let m = v100();
        let fin = solve_finite(3.0, &m, 4096, None, &SolveOptions::default()).unwrap();
        let unb = solve_unbounded(3.0, &m, None, &SolveOptions::default()).unwrap();
        assert!(((fin.ew - unb.ew) / unb.ew).abs() < 1e-4);
        assert!(((fin.eb - unb.eb) / unb.eb).abs() < 1e-6);
    }

    #[test]
    fn cap_can_shorten_latency_when_per_job_time_dominates() {
        // numpy dense solves at alpha = 0.5833, tau0 = 1.4284, b_max = 8,
        // lambda = 0.5 mu(8): capped 4.120145077455703, uncapped 4.120232335504337
        let m = LinearServiceModel::new(0.5833, 1.4284).unwrap();
        let lambda = 0.5 * m.mu_of(8).unwrap();
        let fin = solve_finite(lambda, &m, 8, None, &SolveOptions::default()).unwrap();
        let unb = solve_unbounded(lambda, &m, None, &SolveOptions::default()).unwrap();
        assert!(((fin.ew - 4.120145077455703) / fin.ew).abs() < 1e-9, "{}", fin.ew);
        assert!(((unb.ew - 4.120232335504337) / unb.ew).abs() < 1e-9, "{}", unb.ew);
        assert!(fin.ew < unb.ew);
    }

    #[test]
    fn instability_is_rejected() {
        let m = v100();
        let mu = m.mu_of(64).unwrap();
        assert!(matches!(solve_finite(mu, &m, 64, None, &SolveOptions::default()),
            Err(Error::Unstable(_))));
        assert!(solve_finite(1.0, &m, 0, None, &SolveOptions::default()).is_err());
    }

    #[test]
    fn exceeds_bound_near_finite_boundary() {
        let m = v100();
        let b_max = 64;
        let lambda = 0.98 * m.mu_of(b_max).unwrap();
        let s = solve_finite(lambda, &m, b_max, None, &SolveOptions::default()).unwrap();
        assert!(s.ew > bounds::phi(lambda, &m).unwrap());
    }
}
