//! Usual-stochastic-order checks on transition rows and distributions.
//!
//! Each check returns the largest violation found (0 when the order holds),
//! so callers choose their own tolerance.

use super::matrix::StochasticMatrix;

/// Rounding slack for order checks on freshly built transition matrices.
/// The inequalities are exact mathematically; tail sums of Poisson rows are
/// only accurate to a few ulps.
pub const ORDER_TOL: f64 = 1e-14;

/// `ccdf[k] = sum_{j > k} dist[j]` (so entry 0 is `Pr(X > first state)`).
pub fn ccdf(dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    let mut acc = 0.0;
    for k in (0..dist.len()).rev() {
        out[k] = acc;
        acc += dist[k];
    }
    out
}

/// Largest `CCDF_low(k) - CCDF_high(k)` over all states; distributions of
/// different lengths are padded with zeros.
pub fn ccdf_violation(low: &[f64], high: &[f64]) -> f64 {
    let n = low.len().max(high.len());
    let pad = |d: &[f64]| {
        let mut v = d.to_vec();
        v.resize(n, 0.0);
        ccdf(&v)
    };
    let (a, b) = (pad(low), pad(high));
    a.iter().zip(&b).map(|(x, y)| x - y).fold(0.0, f64::max)
}

/// Largest violation of "row `i` is stochastically smaller than row `i+1`".
pub fn monotone_rows_violation(p: &StochasticMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev = p.row_ccdf(0);
    for i in 1..p.dim() {
        let cur = p.row_ccdf(i);
        for (a, b) in prev.iter().zip(&cur) {
            worst = worst.max(a - b);
        }
        prev = cur;
    }
    worst
}

/// Largest violation of "every row of `low` is stochastically smaller than
/// the same row of `high`".
pub fn comparison_violation(low: &StochasticMatrix, high: &StochasticMatrix) -> f64 {
    assert_eq!(low.dim(), high.dim(), "matrices must have equal dimension");
    let mut worst: f64 = 0.0;
    for i in 0..low.dim() {
        for (a, b) in low.row_ccdf(i).iter().zip(&high.row_ccdf(i)) {
            worst = worst.max(a - b);
        }
    }
    worst
}
