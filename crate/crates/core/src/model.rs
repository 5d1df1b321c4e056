//! Shared domain types: linear batch-time law, service laws, queue and
//! energy models.
//!
//! All types validate their invariants on construction (including when
//! deserialized) and are immutable afterwards.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Deterministic linear batch-time law `tau(b) = alpha * b + tau0`.
///
/// `alpha` is the marginal time per job (ms/job) and `tau0` the fixed
/// per-batch overhead (ms). Throughput `b / tau(b)` is non-decreasing in `b`
/// and tends to `1 / alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearServiceModelRepr")]
pub struct LinearServiceModel {
    alpha: f64,
    tau0: f64,
}

#[derive(Deserialize)]
struct LinearServiceModelRepr {
    alpha: f64,
    tau0: f64,
}

impl TryFrom<LinearServiceModelRepr> for LinearServiceModel {
    type Error = Error;

    fn try_from(r: LinearServiceModelRepr) -> Result<Self> {
        Self::new(r.alpha, r.tau0)
    }
}

impl LinearServiceModel {
    pub fn new(alpha: f64, tau0: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(tau0.is_finite() && tau0 >= 0.0) {
            return Err(Error::Domain(format!("tau0 must be non-negative, got {tau0}")));
        }
        Ok(Self { alpha, tau0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Batch processing time for a batch of `b` jobs.
    pub fn tau_of(&self, b: u64) -> Result<f64> {
        check_batch_size(b)?;
        Ok(self.tau(b))
    }

    /// Mean throughput `b / tau(b)` in jobs/ms.
    pub fn mu_of(&self, b: u64) -> Result<f64> {
        check_batch_size(b)?;
        Ok(b as f64 / self.tau(b))
    }

    /// Asymptotic throughput `1 / alpha`, the supremum of [`Self::mu_of`].
    pub fn capacity(&self) -> f64 {
        1.0 / self.alpha
    }

    /// Unchecked `alpha * b + tau0` for hot loops; callers guarantee `b >= 1`.
    #[inline]
    pub(crate) fn tau(&self, b: u64) -> f64 {
        self.alpha * b as f64 + self.tau0
    }
}

fn check_batch_size(b: u64) -> Result<()> {
    if b == 0 {
        Err(Error::Domain("batch size must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Distribution of the processing time of a batch of size `b`. Every variant
/// has mean `model.tau_of(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", try_from = "ServiceLawRepr")]
pub enum ServiceLaw {
    DeterministicLinear { model: LinearServiceModel },
    ExponentialLinear { model: LinearServiceModel },
    /// Gamma with a coefficient of variation `cv` shared by all batch sizes.
    GammaLinear { model: LinearServiceModel, cv: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "variant")]
enum ServiceLawRepr {
    DeterministicLinear { model: LinearServiceModel },
    ExponentialLinear { model: LinearServiceModel },
    GammaLinear { model: LinearServiceModel, cv: f64 },
}

impl TryFrom<ServiceLawRepr> for ServiceLaw {
    type Error = Error;

    fn try_from(r: ServiceLawRepr) -> Result<Self> {
        match r {
            ServiceLawRepr::DeterministicLinear { model } => Ok(Self::deterministic(model)),
            ServiceLawRepr::ExponentialLinear { model } => Ok(Self::exponential(model)),
            ServiceLawRepr::GammaLinear { model, cv } => Self::gamma(model, cv),
        }
    }
}

impl ServiceLaw {
    pub fn deterministic(model: LinearServiceModel) -> Self {
        Self::DeterministicLinear { model }
    }

    pub fn exponential(model: LinearServiceModel) -> Self {
        Self::ExponentialLinear { model }
    }

    pub fn gamma(model: LinearServiceModel, cv: f64) -> Result<Self> {
        if !(cv.is_finite() && cv > 0.0) {
            return Err(Error::Domain(format!("gamma cv must be positive, got {cv}")));
        }
        Ok(Self::GammaLinear { model, cv })
    }

    pub fn model(&self) -> &LinearServiceModel {
        match self {
            Self::DeterministicLinear { model }
            | Self::ExponentialLinear { model }
            | Self::GammaLinear { model, .. } => model,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::DeterministicLinear { .. })
    }

    pub fn mean_time(&self, b: u64) -> Result<f64> {
        self.model().tau_of(b)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DeterministicLinear { .. } => "deterministic",
            Self::ExponentialLinear { .. } => "exponential",
            Self::GammaLinear { .. } => "gamma",
        }
    }
}

/// Maximum batch size: a finite cap or unbounded grab-all batching.
///
/// Serialized as an integer for finite caps and as the string `"unbounded"`
/// otherwise. Parses `inf`, `unbounded` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchLimit {
    Finite(u64),
    Unbounded,
}

impl BatchLimit {
    pub fn finite(b_max: u64) -> Result<Self> {
        if b_max == 0 {
            return Err(Error::Domain("b_max must be at least 1".into()));
        }
        Ok(Self::Finite(b_max))
    }

    /// Size of the batch formed from `waiting` jobs.
    #[inline]
    pub fn batch_from(&self, waiting: u64) -> u64 {
        match *self {
            Self::Finite(cap) => waiting.min(cap),
            Self::Unbounded => waiting,
        }
    }

    pub fn as_finite(&self) -> Option<u64> {
        match *self {
            Self::Finite(b) => Some(b),
            Self::Unbounded => None,
        }
    }
}

impl fmt::Display for BatchLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for BatchLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "unbounded" | "infinity" => Ok(Self::Unbounded),
            other => {
                let b: u64 = other
                    .parse()
                    .map_err(|_| Error::Domain(format!("invalid b_max '{other}'")))?;
                Self::finite(b)
            }
        }
    }
}

impl Serialize for BatchLimit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(b) => s.serialize_u64(*b),
            Self::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for BatchLimit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(b) => BatchLimit::finite(b).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Full queue definition: Poisson arrival rate, service law and batch cap.
///
/// Construction rejects configurations at or beyond the stability boundary:
/// `lambda * alpha < 1` when unbounded, `lambda < b_max / tau(b_max)` when
/// finite. The inequality is strict with no epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QueueConfigRepr")]
pub struct QueueConfig {
    lambda: f64,
    service: ServiceLaw,
    b_max: BatchLimit,
}

#[derive(Deserialize)]
struct QueueConfigRepr {
    lambda: f64,
    service: ServiceLaw,
    b_max: BatchLimit,
}

impl TryFrom<QueueConfigRepr> for QueueConfig {
    type Error = Error;

    fn try_from(r: QueueConfigRepr) -> Result<Self> {
        Self::new(r.lambda, r.service, r.b_max)
    }
}

impl QueueConfig {
    pub fn new(lambda: f64, service: ServiceLaw, b_max: BatchLimit) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        check_stable(lambda, service.model(), b_max)?;
        Ok(Self {
            lambda,
            service,
            b_max,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn service(&self) -> &ServiceLaw {
        &self.service
    }

    pub fn model(&self) -> &LinearServiceModel {
        self.service.model()
    }

    pub fn b_max(&self) -> BatchLimit {
        self.b_max
    }

    /// Same service law and cap at a different arrival rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.service, self.b_max)
    }
}

/// Supremum of sustainable arrival rates: `1/alpha` unbounded, `mu(b_max)` finite.
pub fn stability_limit(model: &LinearServiceModel, b_max: BatchLimit) -> f64 {
    match b_max {
        BatchLimit::Unbounded => model.capacity(),
        BatchLimit::Finite(b) => b as f64 / model.tau(b),
    }
}

/// Strict stability check shared by every entry point.
pub fn check_stable(lambda: f64, model: &LinearServiceModel, b_max: BatchLimit) -> Result<()> {
    let stable = match b_max {
        BatchLimit::Unbounded => lambda * model.alpha < 1.0,
        BatchLimit::Finite(b) => lambda * model.tau(b) < b as f64,
    };
    if stable {
        Ok(())
    } else {
        Err(Error::Unstable(format!(
            "lambda = {lambda} jobs/ms is not below the stability limit {} jobs/ms (b_max = {b_max})",
            stability_limit(model, b_max)
        )))
    }
}

/// Normalized load `lambda * alpha`. Never fails, so it can report loads at
/// or above 1.
pub fn rho(config: &QueueConfig) -> f64 {
    normalized_load(config.lambda, config.model())
}

pub fn normalized_load(lambda: f64, model: &LinearServiceModel) -> f64 {
    lambda * model.alpha
}

/// Linear per-batch energy `c(b) = beta * b + c0` in millijoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnergyModelRepr")]
pub struct EnergyModel {
    beta: f64,
    c0: f64,
}

#[derive(Deserialize)]
struct EnergyModelRepr {
    beta: f64,
    c0: f64,
}

impl TryFrom<EnergyModelRepr> for EnergyModel {
    type Error = Error;

    fn try_from(r: EnergyModelRepr) -> Result<Self> {
        Self::new(r.beta, r.c0)
    }
}

impl EnergyModel {
    pub fn new(beta: f64, c0: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::Domain(format!("c0 must be non-negative, got {c0}")));
        }
        Ok(Self { beta, c0 })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c_of(&self, b: u64) -> Result<f64> {
        check_batch_size(b)?;
        Ok(self.c(b))
    }

    #[inline]
    pub(crate) fn c(&self, b: u64) -> f64 {
        self.beta * b as f64 + self.c0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v100() -> LinearServiceModel {
        LinearServiceModel::new(0.1438, 1.8874).unwrap()
    }

    #[test]
    fn tau_examples() {
        assert!((v100().tau_of(1).unwrap() - 2.0312).abs() < 1e-12);
        assert!((v100().tau_of(64).unwrap() - 11.0906).abs() < 1e-12);
        let free = LinearServiceModel::new(0.25, 0.0).unwrap();
        assert_eq!(free.tau_of(1).unwrap(), 0.25);
        assert!(matches!(v100().tau_of(0), Err(Error::Domain(_))));
    }

    #[test]
    fn mu_examples() {
        assert!((v100().mu_of(128).unwrap() - 6.307345100474036).abs() < 1e-9);
        let p4 = LinearServiceModel::new(0.5833, 1.4284).unwrap();
        assert!((p4.mu_of(1).unwrap() - 0.4972).abs() < 1e-3);
        let free = LinearServiceModel::new(0.25, 0.0).unwrap();
        for b in [1, 2, 17, 1000] {
            assert!((free.mu_of(b).unwrap() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_validation() {
        assert!(LinearServiceModel::new(0.0, 1.0).is_err());
        assert!(LinearServiceModel::new(-1.0, 1.0).is_err());
        assert!(LinearServiceModel::new(1.0, -0.1).is_err());
        assert!(LinearServiceModel::new(f64::NAN, 0.0).is_err());
        assert!(EnergyModel::new(0.0, 1.0).is_err());
        assert!(EnergyModel::new(1.0, -1.0).is_err());
        assert!(ServiceLaw::gamma(v100(), 0.0).is_err());
    }

    #[test]
    fn rho_examples() {
        let law = ServiceLaw::deterministic(v100());
        let q = QueueConfig::new(3.0, law, BatchLimit::Unbounded).unwrap();
        assert!((rho(&q) - 0.4314).abs() < 1e-12);
        let tiny = QueueConfig::new(1e-12, law, BatchLimit::Unbounded).unwrap();
        assert!(rho(&tiny) < 1e-12);
        let m = v100();
        assert!((normalized_load(1.0 / m.alpha(), &m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stability_is_strict() {
        let m = LinearServiceModel::new(0.5, 1.0).unwrap();
        let law = ServiceLaw::deterministic(m);
        assert!(matches!(
            QueueConfig::new(2.0, law, BatchLimit::Unbounded),
            Err(Error::Unstable(_))
        ));
        assert!(QueueConfig::new(1.999, law, BatchLimit::Unbounded).is_ok());
        // mu(4) = 4 / 3
        assert!(QueueConfig::new(4.0 / 3.0, law, BatchLimit::Finite(4)).is_err());
        assert!(QueueConfig::new(1.3, law, BatchLimit::Finite(4)).is_ok());
        assert!(QueueConfig::new(0.0, law, BatchLimit::Unbounded).is_err());
    }

    #[test]
    fn batch_limit_parse_and_serde() {
        assert_eq!("inf".parse::<BatchLimit>().unwrap(), BatchLimit::Unbounded);
        assert_eq!("64".parse::<BatchLimit>().unwrap(), BatchLimit::Finite(64));
        assert!("0".parse::<BatchLimit>().is_err());
        assert!("x".parse::<BatchLimit>().is_err());
        assert_eq!(serde_json::to_string(&BatchLimit::Finite(8)).unwrap(), "8");
        assert_eq!(
            serde_json::to_string(&BatchLimit::Unbounded).unwrap(),
            "\"unbounded\""
        );
    }

    #[test]
    fn serde_field_names_and_validation() {
        let law = ServiceLaw::gamma(v100(), 0.5).unwrap();
        let q = QueueConfig::new(1.0, law, BatchLimit::Finite(16)).unwrap();
        let json = serde_json::to_value(q).unwrap();
        assert_eq!(json["lambda"], 1.0);
        assert_eq!(json["b_max"], 16);
        assert_eq!(json["service"]["variant"], "GammaLinear");
        assert_eq!(json["service"]["cv"], 0.5);
        assert_eq!(json["service"]["model"]["alpha"], 0.1438);
        assert_eq!(json["service"]["model"]["tau0"], 1.8874);
        let back: QueueConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, q);

        let energy = serde_json::to_value(EnergyModel::new(44.0, 155.0).unwrap()).unwrap();
        assert_eq!(energy, serde_json::json!({"beta": 44.0, "c0": 155.0}));

        let bad = serde_json::json!({"lambda": 10.0, "service": {"variant": "DeterministicLinear",
            "model": {"alpha": 0.1438, "tau0": 1.8874}}, "b_max": "unbounded"});
        assert!(serde_json::from_value::<QueueConfig>(bad).is_err());
        let bad_model = serde_json::json!({"alpha": -1.0, "tau0": 0.0});
        assert!(serde_json::from_value::<LinearServiceModel>(bad_model).is_err());
    }

    proptest! {
        #[test]
        fn tau_increasing_mu_non_decreasing(alpha in 1e-4f64..10.0, tau0 in 0.0f64..100.0, b in 1u64..1_000_000) {
            let m = LinearServiceModel::new(alpha, tau0).unwrap();
            prop_assert!(m.tau_of(b + 1).unwrap() > m.tau_of(b).unwrap());
            prop_assert!(m.mu_of(b + 1).unwrap() >= m.mu_of(b).unwrap());
            prop_assert!(m.mu_of(b).unwrap() <= m.capacity() * (1.0 + 1e-12));
        }

        #[test]
        fn accepted_configs_are_strictly_stable(alpha in 1e-3f64..5.0, tau0 in 0.0f64..20.0,
                                                frac in 0.0f64..1.2, cap in prop::option::of(1u64..512)) {
            let m = LinearServiceModel::new(alpha, tau0).unwrap();
            let limit = cap.map_or(BatchLimit::Unbounded, BatchLimit::Finite);
            let lambda = frac * stability_limit(&m, limit);
            if let Ok(q) = QueueConfig::new(lambda, ServiceLaw::deterministic(m), limit) {
                match limit {
                    BatchLimit::Unbounded => prop_assert!(q.lambda() * alpha < 1.0),
                    BatchLimit::Finite(b) => prop_assert!(q.lambda() * m.tau_of(b).unwrap() < b as f64),
                }
            }
        }
    }
}
