//! Row-stochastic matrices stored as one contiguous non-zero span per row,
//! and the Grassmann-Taksar-Heyman stationary solver.

use crate::error::{Error, Result};

/// Tolerance on row sums accepted by [`StochasticMatrix::from_dense`].
const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
struct SpanRow {
    lo: usize,
    vals: Vec<f64>,
}

impl SpanRow {
    #[inline]
    fn get(&self, j: usize) -> f64 {
        if j < self.lo {
            return 0.0;
        }
        self.vals.get(j - self.lo).copied().unwrap_or(0.0)
    }

    fn hi(&self) -> usize {
        self.lo + self.vals.len()
    }

    /// Grows the span downward so it starts at `lo`.
    fn extend_down(&mut self, lo: usize) {
        if lo < self.lo {
            let mut vals = vec![0.0; self.lo - lo];
            vals.extend_from_slice(&self.vals);
            self.vals = vals;
            self.lo = lo;
        }
    }
}

/// A finite row-stochastic matrix whose rows are stored as contiguous spans
/// of possibly non-zero entries. Transition rows of Poisson-driven chains are
/// concentrated around their mean, so this keeps memory and elimination work
/// proportional to the band width.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: Vec<SpanRow>,
}

impl StochasticMatrix {
    /// Builds a matrix from spans; `rows[i] = (lo, vals)` places `vals` at
    /// columns `lo..lo + vals.len()`.
    pub(crate) fn from_spans(rows: Vec<(usize, Vec<f64>)>) -> Self {
        let n = rows.len();
        let rows = rows
            .into_iter()
            .map(|(lo, vals)| {
                debug_assert!(lo + vals.len() <= n);
                SpanRow { lo, vals }
            })
            .collect();
        Self { rows }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("matrix must have at least one state".into()));
        }
        let mut spans = Vec::with_capacity(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Domain(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Domain(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("row {i} sums to {sum}, not 1")));
            }
            let lo = r.iter().position(|&v| v != 0.0).unwrap_or(0);
            let hi = r.iter().rposition(|&v| v != 0.0).map_or(lo, |p| p + 1);
            spans.push((lo, r[lo..hi].to_vec()));
        }
        Ok(Self::from_spans(spans))
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].vals.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `ccdf[k] = sum_{j >= k} p[i][j]` for `k = 0..n`, accumulated from the
    /// right so small tails are not swamped by rounding.
    pub fn row_ccdf(&self, i: usize) -> Vec<f64> {
        let n = self.dim();
        let row = &self.rows[i];
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += row.get(k);
            out[k] = acc;
        }
        out
    }

    /// Stationary distribution by GTH state reduction.
    ///
    /// States are eliminated from the last to the first; the pivot mass is
    /// taken as the sum of the off-diagonal remainder rather than `1 - p_kk`,
    /// so the procedure involves no subtractions and stays accurate when the
    /// chain is nearly decomposable. Fails when some state cannot reach any
    /// lower-numbered state, which means the chain is reducible.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let mut rows = self.rows.clone();
        let mut pivot_mass = vec![0.0; n];
        let mut scaled: Vec<f64> = Vec::new();

        for k in (1..n).rev() {
            let (lo_k, hi_k) = {
                let r = &rows[k];
                (r.lo.min(k), r.hi().min(k))
            };
            let s: f64 = if lo_k < hi_k {
                rows[k].vals[lo_k - rows[k].lo..hi_k - rows[k].lo].iter().sum()
            } else {
                0.0
            };
            if !(s > 0.0) {
                return Err(Error::Solver(format!(
                    "reducible matrix: state {k} has no transitions to states 0..{k}"
                )));
            }
            pivot_mass[k] = s;
            scaled.clear();
            let base = rows[k].lo;
            scaled.extend(rows[k].vals[lo_k - base..hi_k - base].iter().map(|v| v / s));

            for i in 0..k {
                let row = &mut rows[i];
                if k < row.lo || k >= row.hi() {
                    continue;
                }
                let f = row.vals[k - row.lo];
                if f == 0.0 {
                    continue;
                }
                row.extend_down(lo_k);
                let off = lo_k - row.lo;
                debug_assert!(hi_k <= row.hi());
                for (dst, &src) in row.vals[off..off + scaled.len()].iter_mut().zip(&scaled) {
                    *dst += f * src;
                }
            }
        }

        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for j in 1..n {
            let mut acc = 0.0;
            for (i, p) in pi[..j].iter().enumerate() {
                let v = rows[i].get(j);
                if v != 0.0 {
                    acc += p * v;
                }
            }
            pi[j] = acc / pivot_mass[j];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        Ok(pi)
    }
}

/// Stationary vector of a row-stochastic matrix by GTH elimination.
pub fn stationary(p: &StochasticMatrix) -> Result<Vec<f64>> {
    p.stationary()
}

/// Largest `|(pi P - pi)_j|`.
pub fn balance_residual(p: &StochasticMatrix, pi: &[f64]) -> f64 {
    let n = p.dim();
    let mut out = vec![0.0; n];
    for (i, row) in p.rows.iter().enumerate() {
        for (k, v) in row.vals.iter().enumerate() {
            out[row.lo + k] += pi[i] * v;
        }
    }
    out.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
