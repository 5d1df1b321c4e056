//! Shared fixtures for the criterion benches.

use dynbatch::LinearServiceModel;

/// Tesla V100 mixed-precision fit.
pub fn v100() -> LinearServiceModel {
    LinearServiceModel::new(0.1438, 1.8874).expect("valid model")
}

/// Tesla P4 INT8 fit.
pub fn p4() -> LinearServiceModel {
    LinearServiceModel::new(0.5833, 1.4284).expect("valid model")
}
