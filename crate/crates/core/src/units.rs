//! Conversions between the internal unit system (ms, jobs/ms, mJ) and the
//! units measurement tables are usually published in (seconds, images/s, W).

/// Jobs per second to jobs per millisecond.
pub fn per_second_to_per_ms(rate_per_s: f64) -> f64 {
    rate_per_s / 1000.0
}

/// Jobs per millisecond to jobs per second.
pub fn per_ms_to_per_second(rate_per_ms: f64) -> f64 {
    rate_per_ms * 1000.0
}

/// Batch processing time in ms for a batch of `batch_size` jobs measured at
/// `throughput_per_s` jobs per second.
pub fn batch_time_ms(batch_size: u64, throughput_per_s: f64) -> f64 {
    1000.0 * batch_size as f64 / throughput_per_s
}

/// Inverse of [`batch_time_ms`].
pub fn throughput_per_s(batch_size: u64, batch_time_ms: f64) -> f64 {
    1000.0 * batch_size as f64 / batch_time_ms
}

/// Energy of one batch: watts times milliseconds gives millijoules.
pub fn batch_energy_mj(power_w: f64, batch_time_ms: f64) -> f64 {
    power_w * batch_time_ms
}

/// Jobs per millijoule to jobs per joule (equivalently jobs/s/W).
pub fn per_mj_to_per_j(eta_per_mj: f64) -> f64 {
    eta_per_mj * 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_rows_convert() {
        assert!((batch_time_ms(1, 476.0) - 2.100840336134454).abs() < 1e-12);
        assert!((batch_time_ms(128, 1676.0) - 76.37231503579952).abs() < 1e-10);
        assert_eq!(batch_energy_mj(120.0, 2.5), 300.0);
    }

    proptest! {
        #[test]
        fn throughput_round_trip(b in 1u64..100_000, thr in 1e-3f64..1e7) {
            let back = throughput_per_s(b, batch_time_ms(b, thr));
            prop_assert!(((back - thr) / thr).abs() <= 1e-12);
        }

        #[test]
        fn rate_round_trip(r in 1e-9f64..1e9) {
            let back = per_ms_to_per_second(per_second_to_per_ms(r));
            prop_assert!(((back - r) / r).abs() <= 1e-15);
        }
    }
}
