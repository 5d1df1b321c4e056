use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The arrival rate is at or beyond the stability boundary.
    #[error("unstable configuration: {0}")]
    Unstable(String),

    /// A measurement row could not be ingested. `row` is 1-based and counts
    /// data rows, not the header.
    #[error("row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unsupported service law: {0}")]
    UnsupportedLaw(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(
        "truncation level {level} exceeds ceiling {ceiling} (achieved tail mass {tail_mass:e})"
    )]
    Truncation {
        level: usize,
        ceiling: usize,
        tail_mass: f64,
    },

    /// The simulated queue grew past its hard cap.
    #[error("runaway queue: {0}")]
    Runaway(String),
}
