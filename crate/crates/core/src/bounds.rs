//! Closed-form latency, idle-probability and energy-efficiency quantities
//! for the unbounded grab-all queue with deterministic linear batch times.
//!
//! All expressions use the factored forms below rather than expanded
//! polynomials. Accuracy degrades as `rho = lambda * alpha` approaches 1;
//! beyond `rho > 0.999` expect only a few correct digits since every bound
//! carries a `1 / (1 - rho)` factor.
//!
//! `lambda = 0` is accepted as the empty-system limit by every function whose
//! expression stays finite there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stability_limit, BatchLimit, EnergyModel, LinearServiceModel};

/// Relative gap under which `phi0` and `phi1` are reported as equal.
pub const CROSSOVER_REL_TOL: f64 = 1e-9;

fn check_rate(lambda: f64, model: &LinearServiceModel) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if lambda * model.alpha() >= 1.0 {
        return Err(Error::Unstable(format!(
            "rho = lambda * alpha = {} >= 1",
            lambda * model.alpha()
        )));
    }
    Ok(())
}

/// Latency bound obtained by replacing the mean batch size with 1.
pub fn phi0(lambda: f64, model: &LinearServiceModel) -> Result<f64> {
    check_rate(lambda, model)?;
    let (a, t0) = (model.alpha(), model.tau0());
    let la = lambda * a;
    let lt = lambda * t0;
    Ok((a + t0) / (2.0 * (1.0 - la)) * (1.0 + 2.0 * lt + (1.0 - lt) / (1.0 + la)))
}

/// Latency bound obtained by replacing the idle probability with 0.
pub fn phi1(lambda: f64, model: &LinearServiceModel) -> Result<f64> {
    check_rate(lambda, model)?;
    let (a, t0) = (model.alpha(), model.tau0());
    let la = lambda * a;
    Ok(1.5 * t0 / (1.0 - la) + 0.5 * a * (la + 2.0) / ((1.0 - la) * (1.0 + la)))
}

/// `min(phi0, phi1)`; `phi0` is the smaller one exactly when
/// `lambda <= 1 / (alpha + tau0)`.
pub fn phi(lambda: f64, model: &LinearServiceModel) -> Result<f64> {
    Ok(phi0(lambda, model)?.min(phi1(lambda, model)?))
}

/// Arrival rate `1 / (alpha + tau0)` at which `phi0 == phi1`.
pub fn crossover_lambda(model: &LinearServiceModel) -> f64 {
    1.0 / (model.alpha() + model.tau0())
}

/// Lower bound `max(0, 1 - lambda (alpha + tau0))` on the idle probability.
pub fn pi0_lower(lambda: f64, model: &LinearServiceModel) -> f64 {
    (1.0 - lambda * (model.alpha() + model.tau0())).max(0.0)
}

/// Upper bound `min(1, lambda (alpha + tau0))` on server utilization.
pub fn util_upper(lambda: f64, model: &LinearServiceModel) -> f64 {
    1.0 - pi0_lower(lambda, model)
}

/// Exact mean latency expressed through the idle probability `pi0`.
///
/// Decreasing in `pi0`; substituting the two lower bounds of `pi0` gives
/// [`phi0`] and [`phi1`].
pub fn ew_from_pi0(lambda: f64, model: &LinearServiceModel, pi0: f64) -> Result<f64> {
    check_rate(lambda, model)?;
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::Domain(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    let (a, t0) = (model.alpha(), model.tau0());
    let la = lambda * a;
    // lambda * (2 a t0 + a^2 + (1 - pi0 - la) t0 / lambda), kept free of 1/lambda
    let inner = lambda * (2.0 * a * t0 + a * a) + (1.0 - pi0 - la) * t0;
    Ok(a + t0 + (1.0 + 2.0 * la) * inner / (2.0 * (1.0 - la) * (1.0 + la)))
}

/// Exact mean latency from the first two moments of the stationary batch size.
pub fn ew_from_batch_moments(
    lambda: f64,
    model: &LinearServiceModel,
    eb: f64,
    eb2: f64,
) -> Result<f64> {
    if !(eb >= 1.0) {
        return Err(Error::Domain(format!("mean batch size must be >= 1, got {eb}")));
    }
    if !(eb2.is_finite() && eb2 >= 0.0) {
        return Err(Error::Domain(format!("invalid second moment {eb2}")));
    }
    check_rate(lambda, model)?;
    let (a, t0) = (model.alpha(), model.tau0());
    if lambda == 0.0 {
        return Ok(a + t0);
    }
    Ok(a + t0 + (1.0 + 2.0 * lambda * a) * (eb2 - eb) / (2.0 * lambda * eb))
}

/// `(E[B], E[B^2])` of the stationary batch size in terms of the probability
/// `p_a0` that no job arrives during a stationary batch's service.
pub fn batch_moments_from_p_a0(
    lambda: f64,
    model: &LinearServiceModel,
    p_a0: f64,
) -> Result<(f64, f64)> {
    check_rate(lambda, model)?;
    if !(0.0..=1.0).contains(&p_a0) {
        return Err(Error::Domain(format!("Pr(A=0) must lie in [0, 1], got {p_a0}")));
    }
    let (a, t0) = (model.alpha(), model.tau0());
    let la = lambda * a;
    let eb = (lambda * t0 + p_a0) / (1.0 - la);
    let eb2 = ((1.0 + 2.0 * lambda * la * t0) * eb + (lambda * t0).powi(2))
        / ((1.0 - la) * (1.0 + la));
    Ok((eb, eb2))
}

/// Energy efficiency `1 / (beta + c0 / E[B])` in jobs per millijoule.
pub fn eta_from_eb(energy: &EnergyModel, eb: f64) -> Result<f64> {
    if !(eb >= 1.0) {
        return Err(Error::Domain(format!("mean batch size must be >= 1, got {eb}")));
    }
    Ok(1.0 / (energy.beta() + energy.c0() / eb))
}

/// Lower bound on `E[B]` implied by the utilization identity.
pub fn eb_lower(lambda: f64, model: &LinearServiceModel) -> Result<f64> {
    check_rate(lambda, model)?;
    let la = lambda * model.alpha();
    Ok((lambda * model.tau0() / (1.0 - la)).max(1.0))
}

/// Lower bound on the energy efficiency, `eta_from_eb` at [`eb_lower`].
pub fn eta_lower(lambda: f64, model: &LinearServiceModel, energy: &EnergyModel) -> Result<f64> {
    eta_from_eb(energy, eb_lower(lambda, model)?)
}

/// Which of the two latency bounds is active at a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Phi0,
    Phi1,
}

/// Every closed-form quantity at one arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lambda: f64,
    pub rho: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub phi: f64,
    pub branch: Branch,
    /// `phi0` and `phi1` agree to [`CROSSOVER_REL_TOL`].
    pub at_crossover: bool,
    pub crossover_lambda: f64,
    pub util_upper: f64,
    pub pi0_lower: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<u64>,
    /// Set when a finite `b_max` is configured and `lambda > 0.9 mu(b_max)`;
    /// the unbounded bounds then stop describing the finite system well.
    pub near_finite_boundary: bool,
}

impl BoundsReport {
    /// Computes the report. The bounds are those of the unbounded system;
    /// with a finite `b_max` they are still reported, and
    /// `near_finite_boundary` flags rates where they stop being informative.
    pub fn new(
        lambda: f64,
        model: &LinearServiceModel,
        energy: Option<&EnergyModel>,
        b_max: BatchLimit,
    ) -> Result<Self> {
        let phi0 = phi0(lambda, model)?;
        let phi1 = phi1(lambda, model)?;
        let (phi, branch) = if phi0 <= phi1 {
            (phi0, Branch::Phi0)
        } else {
            (phi1, Branch::Phi1)
        };
        let near_finite_boundary = match b_max {
            BatchLimit::Finite(_) => lambda > 0.9 * stability_limit(model, b_max),
            BatchLimit::Unbounded => false,
        };
        Ok(Self {
            lambda,
            rho: lambda * model.alpha(),
            phi0,
            phi1,
            phi,
            branch,
            at_crossover: (phi0 - phi1).abs() <= CROSSOVER_REL_TOL * phi,
            crossover_lambda: crossover_lambda(model),
            util_upper: util_upper(lambda, model),
            pi0_lower: pi0_lower(lambda, model),
            eta_lower: energy.map(|e| eta_lower(lambda, model, e)).transpose()?,
            b_max: b_max.as_finite(),
            near_finite_boundary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v100() -> LinearServiceModel {
        LinearServiceModel::new(0.1438, 1.8874).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn phi0_examples() {
        let m = v100();
        assert!(close(phi0(0.0, &m).unwrap(), 2.0312, 1e-14));
        assert!(close(phi0(1e-12, &m).unwrap(), 2.0312, 1e-9));
        assert!(close(phi0(0.2, &m).unwrap(), 2.46786997898529, 1e-12));
        assert!(close(phi0(3.0, &m).unwrap(), 16.195496062480075, 1e-12));
    }

    #[test]
    fn phi1_examples() {
        let m = v100();
        assert!(close(phi1(0.0, &m).unwrap(), 2.9749, 1e-14));
        assert!(close(phi1(3.0, &m).unwrap(), 5.193863073379921, 1e-12));
        let free = LinearServiceModel::new(0.3, 0.0).unwrap();
        assert!(close(phi1(0.0, &free).unwrap(), 0.3, 1e-15));
    }

    #[test]
    fn phi_and_crossover() {
        let m = v100();
        let cross = crossover_lambda(&m);
        assert!(close(cross, 0.4923198109491926, 1e-12));
        assert!(close(phi0(cross, &m).unwrap(), phi1(cross, &m).unwrap(), 1e-9));
        assert!(close(phi(3.0, &m).unwrap(), phi1(3.0, &m).unwrap(), 0.0));
        let r = BoundsReport::new(cross, &m, None, BatchLimit::Unbounded).unwrap();
        assert!(r.at_crossover);
        let r = BoundsReport::new(3.0, &m, None, BatchLimit::Unbounded).unwrap();
        assert_eq!(r.branch, Branch::Phi1);
        assert!(!r.at_crossover);
        assert!(close(r.phi, 5.193863073379921, 1e-12));
    }

    #[test]
    fn instability_is_an_error() {
        let m = v100();
        assert!(matches!(phi0(1.0 / 0.1438, &m), Err(Error::Unstable(_))));
        assert!(matches!(phi1(7.0, &m), Err(Error::Unstable(_))));
        assert!(matches!(ew_from_pi0(7.0, &m, 0.0), Err(Error::Unstable(_))));
        assert!(matches!(eta_lower(7.0, &m, &EnergyModel::new(1.0, 1.0).unwrap()),
            Err(Error::Unstable(_))));
        assert!(phi0(-1.0, &m).is_err());
    }

    #[test]
    fn pi0_lower_examples() {
        let m = v100();
        assert!(close(pi0_lower(0.2, &m), 0.59376, 1e-12));
        assert_eq!(pi0_lower(1.0, &m), 0.0);
        assert_eq!(pi0_lower(0.0, &m), 1.0);
        assert!(close(util_upper(0.2, &m), 0.40624, 1e-12));
    }

    #[test]
    fn ew_from_pi0_reproduces_both_bounds() {
        let m = v100();
        for lambda in [0.05, 0.2, 0.49, 1.0, 3.0, 6.5] {
            let lb = 1.0 - lambda * (m.alpha() + m.tau0());
            if lb >= 0.0 {
                assert!(close(ew_from_pi0(lambda, &m, lb).unwrap(), phi0(lambda, &m).unwrap(), 1e-12));
            }
            assert!(close(ew_from_pi0(lambda, &m, 0.0).unwrap(), phi1(lambda, &m).unwrap(), 1e-12));
        }
        assert!(ew_from_pi0(1.0, &m, 1.5).is_err());
    }

    #[test]
    fn ew_from_batch_moments_examples() {
        let m = v100();
        assert!(close(ew_from_batch_moments(3.0, &m, 1.0, 1.0).unwrap(), 2.0312, 1e-14));
        assert!(close(ew_from_batch_moments(0.0, &m, 1.0, 1.0).unwrap(), 2.0312, 1e-14));
        assert!(matches!(ew_from_batch_moments(3.0, &m, 0.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn batch_moments_examples() {
        let m = v100();
        let (eb, eb2) = batch_moments_from_p_a0(0.0, &m, 1.0).unwrap();
        assert_eq!((eb, eb2), (1.0, 1.0));
        let (eb, _) = batch_moments_from_p_a0(3.0, &m, 0.0).unwrap();
        assert!(close(eb, 9.958142806894127, 1e-12));
        assert!(batch_moments_from_p_a0(3.0, &m, -0.1).is_err());
    }

    #[test]
    fn eta_examples() {
        let e = EnergyModel::new(44.0, 155.0).unwrap();
        assert!(close(eta_from_eb(&e, 1.0).unwrap(), 1.0 / 199.0, 1e-15));
        assert!(close(eta_from_eb(&e, 1e15).unwrap(), 1.0 / 44.0, 1e-12));
        assert!(eta_from_eb(&e, 0.9).is_err());
        let m = v100();
        assert!(close(eta_lower(0.0, &m, &e).unwrap(), 1.0 / 199.0, 1e-15));
        let near = (1.0 - 1e-9) / m.alpha();
        assert!(close(eta_lower(near, &m, &e).unwrap(), 1.0 / 44.0, 1e-6));
        let r = BoundsReport::new(3.0, &m, Some(&e), BatchLimit::Finite(64)).unwrap();
        assert!(r.eta_lower.is_some());
        assert!(!r.near_finite_boundary);
        let mu64 = m.mu_of(64).unwrap();
        let r = BoundsReport::new(0.95 * mu64, &m, None, BatchLimit::Finite(64)).unwrap();
        assert!(r.near_finite_boundary);
    }

    fn stable_case() -> impl Strategy<Value = (LinearServiceModel, f64)> {
        (1e-3f64..2.0, 0.0f64..30.0, 1e-4f64..0.999).prop_map(|(a, ratio, r)| {
            let m = LinearServiceModel::new(a, a * ratio).unwrap();
            (m, r / a)
        })
    }

    proptest! {
        #[test]
        fn phi_is_min_and_crossover_flips(case in stable_case()) {
            let (m, lambda) = case;
            let p0 = phi0(lambda, &m).unwrap();
            let p1 = phi1(lambda, &m).unwrap();
            prop_assert_eq!(phi(lambda, &m).unwrap(), p0.min(p1));
            let cross = crossover_lambda(&m);
            if lambda < cross * (1.0 - 1e-6) {
                prop_assert!(p0 <= p1);
            } else if lambda > cross * (1.0 + 1e-6) {
                prop_assert!(p0 > p1);
            }
        }

        #[test]
        fn ew_from_pi0_non_increasing(case in stable_case(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let (m, lambda) = case;
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let a = ew_from_pi0(lambda, &m, lo).unwrap();
            let b = ew_from_pi0(lambda, &m, hi).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-14));
        }

        #[test]
        fn identity_chain(case in stable_case(), p_a0 in 0.0f64..1.0) {
            // Lemma-3 moments -> utilization identity pi0 -> pi0 route must
            // agree with the moment route.
            let (m, lambda) = case;
            let (eb, eb2) = batch_moments_from_p_a0(lambda, &m, p_a0).unwrap();
            prop_assume!(eb >= 1.0);
            let pi0 = 1.0 - lambda * m.alpha() - lambda * m.tau0() / eb;
            prop_assume!((0.0..=1.0).contains(&pi0));
            let via_moments = ew_from_batch_moments(lambda, &m, eb, eb2).unwrap();
            let via_pi0 = ew_from_pi0(lambda, &m, pi0).unwrap();
            prop_assert!(close(via_moments, via_pi0, 1e-10), "{} vs {}", via_moments, via_pi0);
        }

        #[test]
        fn eta_monotone_and_lower_bound_consistent(case in stable_case(), eb in 1.0f64..1e4, d in 0.0f64..1e3) {
            let (m, lambda) = case;
            let e = EnergyModel::new(0.5, 7.0).unwrap();
            prop_assert!(eta_from_eb(&e, eb + d).unwrap() >= eta_from_eb(&e, eb).unwrap());
            let lb = eb_lower(lambda, &m).unwrap();
            prop_assert_eq!(eta_lower(lambda, &m, &e).unwrap(), eta_from_eb(&e, lb).unwrap());
        }
    }

    #[test]
    fn bounds_non_decreasing_in_lambda() {
        for m in [v100(), LinearServiceModel::new(0.5833, 1.4284).unwrap(),
                  LinearServiceModel::new(1.0, 0.0).unwrap()] {
            let n = 2000;
            let mut prev = (0.0, 0.0);
            for i in 0..n {
                let lambda = (i as f64 / n as f64) * 0.999 / m.alpha();
                let cur = (phi0(lambda, &m).unwrap(), phi1(lambda, &m).unwrap());
                assert!(cur.0 >= prev.0 && cur.1 >= prev.1, "lambda {lambda}");
                prev = cur;
            }
        }
    }
}
