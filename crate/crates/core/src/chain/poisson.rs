//! Poisson probabilities for large means without overflow or underflow.

use statrs::function::gamma::ln_gamma;

/// Probabilities below this are treated as structural zeros.
pub(crate) const NEGLIGIBLE: f64 = 1e-300;

/// The non-negligible part of a Poisson pmf: `probs[i] = Pr(X = lo + i)`.
#[derive(Debug, Clone)]
pub(crate) struct PoissonSpan {
    pub lo: usize,
    pub probs: Vec<f64>,
}

impl PoissonSpan {
    /// Evaluates the pmf outward from the mode with the ratio recurrences
    /// `p(k-1) = p(k) k / m` and `p(k+1) = p(k) m / (k+1)`, seeded by the
    /// log-space value at the mode. Stops once terms drop below
    /// [`NEGLIGIBLE`], then renormalizes.
    pub fn new(mean: f64) -> Self {
        debug_assert!(mean.is_finite() && mean >= 0.0);
        if mean == 0.0 {
            return Self { lo: 0, probs: vec![1.0] };
        }
        let mode = mean.floor() as usize;
        let ln_mode = mode as f64 * mean.ln() - mean - ln_gamma(mode as f64 + 1.0);
        let p_mode = ln_mode.exp();

        let mut below = Vec::new();
        let mut p = p_mode;
        let mut k = mode;
        while k > 0 {
            p *= k as f64 / mean;
            if p < NEGLIGIBLE {
                break;
            }
            below.push(p);
            k -= 1;
        }
        let lo = mode - below.len();
        below.reverse();
        let mut probs = below;
        probs.push(p_mode);
        let mut p = p_mode;
        let mut k = mode;
        loop {
            k += 1;
            p *= mean / k as f64;
            if p < NEGLIGIBLE {
                break;
            }
            probs.push(p);
        }
        // The span holds all but ~1e-300 of the mass; renormalizing removes
        // the relative error of ln_gamma at the mode.
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self { lo, probs }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        if k < self.lo {
            0.0
        } else {
            self.probs.get(k - self.lo).copied().unwrap_or(0.0)
        }
    }

    /// One past the largest non-negligible value.
    pub fn end(&self) -> usize {
        self.lo + self.probs.len()
    }

    /// `Pr(X >= k)` summed from the upper end, free of cancellation.
    pub fn sf(&self, k: usize) -> f64 {
        let start = k.max(self.lo);
        if start >= self.end() {
            return 0.0;
        }
        self.probs[start - self.lo..].iter().rev().sum()
    }
}

/// Single Poisson probability `e^{-m} m^k / k!`.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    PoissonSpan::new(mean).pmf(k as usize)
}
