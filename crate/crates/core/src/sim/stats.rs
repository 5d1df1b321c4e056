use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Point estimate with the half-width of a 99% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }

    /// Student-t interval from independent samples. A single sample gets an
    /// infinite half-width.
    pub(crate) fn from_samples(xs: &[f64], level: f64) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, half_width: f64::INFINITY };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = student_t_quantile(0.5 + level / 2.0, (n - 1) as f64);
        Self { mean, half_width: t * (var / n as f64).sqrt() }
    }
}

/// Quantile of the standard Student-t distribution.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom").inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles() {
        assert!((student_t_quantile(0.995, 31.0) - 2.7440).abs() < 1e-3);
        assert!((student_t_quantile(0.995, 19.0) - 2.8609).abs() < 1e-3);
    }

    #[test]
    fn interval_from_samples() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0], 0.99);
        assert_eq!(e.mean, 2.0);
        // t_{0.995, 2} = 9.9248, sd = 1
        assert!((e.half_width - 9.9248 / 3f64.sqrt()).abs() < 1e-3);
        assert!(e.contains(2.5) && !e.contains(10.0));
        assert!(Estimate::from_samples(&[4.0], 0.99).half_width.is_infinite());
    }
}
