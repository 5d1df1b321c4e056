//! Calibration of the linear batch-time and batch-energy laws from
//! measurement tables by ordinary least squares.
//!
//! Input CSV (header required, empty cells for absent values):
//!
//! ```text
//! batch_size,throughput_per_s,batch_time_ms,power_w
//! 1,476,,120
//! 2,880,,109
//! ```

use std::collections::HashMap;
use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnergyModel, LinearServiceModel};
use crate::units;

pub const CSV_COLUMNS: [&str; 4] = ["batch_size", "throughput_per_s", "batch_time_ms", "power_w"];

/// One measured batch size. At least one of `throughput` (jobs/s) and
/// `batch_time` (ms) is present; `power` is average board power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub batch_size: u64,
    pub throughput: Option<f64>,
    pub batch_time: Option<f64>,
    pub power: Option<f64>,
}

impl MeasurementRow {
    /// Batch time in ms, preferring the measured time over the throughput.
    pub fn time_ms(&self) -> Option<f64> {
        self.batch_time
            .or_else(|| self.throughput.map(|t| units::batch_time_ms(self.batch_size, t)))
    }
}

/// Validated measurements, sorted by strictly increasing batch size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSet {
    rows: Vec<MeasurementRow>,
}

impl MeasurementSet {
    /// Validates and sorts `rows`. Errors name the offending row by its
    /// 1-based position in `rows`.
    pub fn new(rows: Vec<MeasurementRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let row = i + 1;
            if r.batch_size == 0 {
                return Err(Error::Ingest { row, message: "batch_size must be at least 1".into() });
            }
            if r.throughput.is_none() && r.batch_time.is_none() {
                return Err(Error::Ingest {
                    row,
                    message: "needs throughput_per_s or batch_time_ms".into(),
                });
            }
            for (name, v) in [
                ("throughput_per_s", r.throughput),
                ("batch_time_ms", r.batch_time),
                ("power_w", r.power),
            ] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Ingest {
                            row,
                            message: format!("{name} must be positive, got {v}"),
                        });
                    }
                }
            }
        }
        let mut indexed: Vec<(usize, MeasurementRow)> = rows.into_iter().enumerate().collect();
        indexed.sort_by_key(|(_, r)| r.batch_size);
        for pair in indexed.windows(2) {
            if pair[0].1.batch_size == pair[1].1.batch_size {
                return Err(Error::Ingest {
                    row: pair[1].0.max(pair[0].0) + 1,
                    message: format!("duplicate batch_size {}", pair[1].1.batch_size),
                });
            }
        }
        Ok(Self { rows: indexed.into_iter().map(|(_, r)| r).collect() })
    }

    pub fn rows(&self) -> &[MeasurementRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parses the measurement CSV format. Columns are matched by header name,
    /// so extra columns are ignored and order does not matter.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Ingest { row: 0, message: format!("bad header: {e}") })?
            .clone();
        let index: HashMap<&str, usize> =
            headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let col = |name: &str| {
            index.get(name).copied().ok_or_else(|| Error::Ingest {
                row: 0,
                message: format!(
                    "missing column '{name}' (expected header {})",
                    CSV_COLUMNS.join(",")
                ),
            })
        };
        let (ib, it, im, ip) =
            (col(CSV_COLUMNS[0])?, col(CSV_COLUMNS[1])?, col(CSV_COLUMNS[2])?, col(CSV_COLUMNS[3])?);

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Ingest { row, message: e.to_string() })?;
            let field = |idx: usize| rec.get(idx).unwrap_or("");
            let batch_size = field(ib).parse::<u64>().map_err(|_| Error::Ingest {
                row,
                message: format!("column batch_size: invalid integer '{}'", field(ib)),
            })?;
            let opt = |idx: usize, name: &str| -> Result<Option<f64>> {
                let s = field(idx);
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| Error::Ingest {
                    row,
                    message: format!("column {name}: invalid number '{s}'"),
                })
            };
            rows.push(MeasurementRow {
                batch_size,
                throughput: opt(it, CSV_COLUMNS[1])?,
                batch_time: opt(im, CSV_COLUMNS[2])?,
                power: opt(ip, CSV_COLUMNS[3])?,
            });
        }
        Self::new(rows)
    }
}

/// One fitted point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub b: u64,
    pub observed: f64,
    pub fitted: f64,
}

/// Least-squares line `slope * b + intercept` with its coefficient of
/// determination computed on the fitted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<Residual>,
    /// The unconstrained intercept was negative and the line was refit
    /// through the origin.
    #[serde(default)]
    pub intercept_clamped: bool,
}

impl FitResult {
    pub fn service_model(&self) -> Result<LinearServiceModel> {
        LinearServiceModel::new(self.slope, self.intercept)
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        EnergyModel::new(self.slope, self.intercept)
    }
}

/// Batch times in ms sorted by batch size; measured time wins over throughput.
pub fn to_batch_times(m: &MeasurementSet) -> Vec<(u64, f64)> {
    m.rows()
        .iter()
        .map(|r| (r.batch_size, r.time_ms().expect("validated on construction")))
        .collect()
}

/// Fits `tau(b) = alpha b + tau0`.
pub fn fit_service(m: &MeasurementSet) -> Result<FitResult> {
    linear_fit(&to_batch_times(m))
}

/// Fits `c(b) = beta b + c0` to the per-batch energies `power * tau(b)` (mJ).
pub fn fit_energy(m: &MeasurementSet) -> Result<FitResult> {
    let points = m
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let power = r.power.ok_or_else(|| Error::Ingest {
                row: i + 1,
                message: format!("batch_size {} has no power_w for the energy fit", r.batch_size),
            })?;
            let time = r.time_ms().expect("validated on construction");
            Ok((r.batch_size, units::batch_energy_mj(power, time)))
        })
        .collect::<Result<Vec<_>>>()?;
    linear_fit(&points)
}

/// Unweighted ordinary least squares of `y` on `b`.
///
/// A negative intercept violates the non-negative overhead of both linear
/// laws; it is then clamped to 0 and the slope is refit through the origin,
/// which is the constrained least-squares optimum.
pub fn linear_fit(points: &[(u64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("batch sizes have zero variance".into()));
    }
    let mut slope = sxy / sxx;
    let mut intercept = mean_y - slope * mean_x;
    let mut clamped = false;
    if intercept < 0.0 {
        warn!("fitted intercept {intercept} is negative; clamping to 0 and refitting through the origin");
        let sx2: f64 = points.iter().map(|p| (p.0 as f64).powi(2)).sum();
        let sxy0: f64 = points.iter().map(|p| p.0 as f64 * p.1).sum();
        slope = sxy0 / sx2;
        intercept = 0.0;
        clamped = true;
    }

    let residuals: Vec<Residual> = points
        .iter()
        .map(|&(b, y)| Residual { b, observed: y, fitted: slope * b as f64 + intercept })
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| (r.observed - r.fitted).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(FitResult { slope, intercept, r_squared, residuals, intercept_clamped: clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const V100: &str = "batch_size,throughput_per_s,batch_time_ms,power_w
1,476,,120
2,880,,109
4,1631,,132
8,2685,,153
64,5877,,274
128,6275,,285
";

    #[test]
    fn csv_ingest_and_batch_times() {
        let m = MeasurementSet::from_csv(V100.as_bytes()).unwrap();
        assert_eq!(m.len(), 6);
        let t = to_batch_times(&m);
        assert_eq!(t[0].0, 1);
        assert!((t[0].1 - 2.1008).abs() < 1e-4);
    }

    #[test]
    fn batch_time_passthrough() {
        let m = MeasurementSet::new(vec![
            MeasurementRow { batch_size: 2, throughput: Some(1.0), batch_time: Some(5.0), power: None },
            MeasurementRow { batch_size: 1, throughput: Some(1000.0), batch_time: None, power: None },
        ])
        .unwrap();
        assert_eq!(to_batch_times(&m), vec![(1, 1.0), (2, 5.0)]);
    }

    #[test]
    fn ingest_errors_name_the_row() {
        let err = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n1,10,,\n2,,,5\n".as_bytes())
            .unwrap_err();
        assert_eq!(err, Error::Ingest { row: 2, message: "needs throughput_per_s or batch_time_ms".into() });
        let err = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n1,abc,,\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 1, ref message } if message.contains("throughput_per_s")));
        let err = MeasurementSet::from_csv("batch_size,throughput\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 0, .. }));
        let err = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n4,1,,\n4,2,,\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 2, .. }));
        let err = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n0,1,,\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 1, .. }));
        let err = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n1,-1,,\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 1, .. }));
    }

    #[test]
    fn energy_fit_requires_power() {
        let m = MeasurementSet::from_csv("batch_size,throughput_per_s,batch_time_ms,power_w\n1,10,,3\n2,15,,\n".as_bytes())
            .unwrap();
        assert!(matches!(fit_energy(&m), Err(Error::Ingest { row: 2, .. })));
    }

    #[test]
    fn energy_observation_is_power_times_time() {
        let m = MeasurementSet::from_csv(V100.as_bytes()).unwrap();
        let fit = fit_energy(&m).unwrap();
        assert!((fit.residuals[0].observed - 252.1).abs() < 0.05);
    }

    #[test]
    fn exact_synthetic_fit() {
        let pts: Vec<(u64, f64)> = (1..=10).map(|b| (b, 0.5 * b as f64 + 2.0)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
        assert!(!f.intercept_clamped);
    }

    #[test]
    fn degenerate_fits_fail() {
        assert!(matches!(linear_fit(&[(1, 2.0)]), Err(Error::Fit(_))));
        assert!(matches!(linear_fit(&[]), Err(Error::Fit(_))));
    }

    #[test]
    fn negative_intercept_is_clamped() {
        let pts = [(1, 0.5), (2, 2.0), (3, 3.5)];
        let f = linear_fit(&pts).unwrap();
        assert!(f.intercept_clamped);
        assert_eq!(f.intercept, 0.0);
        // through-origin slope sum(xy)/sum(x^2) = 15/14
        assert!((f.slope - 15.0 / 14.0).abs() < 1e-14);
        for r in &f.residuals {
            assert_eq!(r.fitted, f.slope * r.b as f64);
        }
    }

    #[test]
    fn json_field_names() {
        let f = linear_fit(&[(1, 1.0), (2, 2.0)]).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        for k in ["slope", "intercept", "r_squared", "residuals"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(v["residuals"][0].get("observed").is_some());
    }

    proptest! {
        #[test]
        fn recovers_exact_linear_data(alpha in 1e-3f64..10.0, tau0 in 0.0f64..50.0,
                                      sizes in prop::collection::btree_set(1u64..4096, 2..20)) {
            let m = LinearServiceModel::new(alpha, tau0).unwrap();
            let pts: Vec<(u64, f64)> = sizes.iter().map(|&b| (b, m.tau_of(b).unwrap())).collect();
            let f = linear_fit(&pts).unwrap();
            prop_assert!(((f.slope - alpha) / alpha).abs() < 1e-9);
            prop_assert!((f.intercept - tau0).abs() <= 1e-9 * tau0.max(alpha));
            prop_assert!((f.r_squared - 1.0).abs() < 1e-9);
        }

        #[test]
        fn fit_is_permutation_invariant(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = MeasurementSet::from_csv(V100.as_bytes()).unwrap();
            let mut rows = base.rows().to_vec();
            rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled = MeasurementSet::new(rows).unwrap();
            prop_assert_eq!(fit_service(&shuffled).unwrap(), fit_service(&base).unwrap());
        }
    }
}
