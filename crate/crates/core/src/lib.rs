//! Analysis toolkit for single-server dynamic-batching queues whose batch
//! processing time grows linearly with the batch size.
//!
//! Jobs arrive as a Poisson stream. Whenever the server frees up, every
//! waiting job (up to an optional maximum batch size) is merged into one
//! batch and processed together. The crate provides:
//!
//! - [`model`]: the shared domain types (service law, queue and energy models),
//! - [`bounds`]: closed-form latency, idle-probability and energy-efficiency bounds,
//! - [`fit`]: least-squares calibration of the linear time and energy laws
//!   from measurement tables,
//! - [`chain`]: exact numerical stationary analysis of the batch-size chain,
//! - [`sim`]: a seeded discrete-event simulator with confidence intervals.
//!
//! Units are fixed internally: milliseconds, jobs per millisecond and
//! millijoules. The [`units`] module converts at I/O boundaries.

pub mod bounds;
pub mod chain;
mod error;
pub mod fit;
pub mod model;
pub mod sim;
pub mod units;

pub use bounds::BoundsReport;
pub use chain::{ChainSolution, SolveOptions};
pub use error::{Error, Result};
pub use fit::{FitResult, MeasurementRow, MeasurementSet};
pub use model::{BatchLimit, EnergyModel, LinearServiceModel, QueueConfig, ServiceLaw};
pub use sim::{Estimate, SimConfig, SimReport};
