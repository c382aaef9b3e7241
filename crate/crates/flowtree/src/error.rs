//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised while building windows, evaluating kernels or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    /// The tree-description document could not be parsed or violates the schema.
    #[error("schema error: {0}")]
    Schema(String),
    /// A vertex record points to a predecessor that creates a cycle.
    #[error("cycle detected at vertex {0}")]
    Cycle(String),
    /// The vertex records do not form a single connected tree.
    #[error("disconnected window: {0}")]
    Disconnected(String),
    /// The flow equation fails at a complete vertex.
    #[error("flow equation violated at vertex {vertex}: m = {mass}, sum over successors = {sum}")]
    FlowViolated { vertex: String, mass: String, sum: String },
    /// A measure value is zero or negative.
    #[error("nonpositive measure at vertex {0}")]
    NonPositiveMeasure(String),
    /// A construction would exceed the configured vertex cap.
    #[error("resource limit exceeded: {needed} vertices requested, cap is {cap}")]
    ResourceLimit { needed: u128, cap: usize },
    /// A kernel was requested at a vertex that is not safe for the operator degree.
    #[error("insufficient window margin at vertex {vertex} for radius {radius}")]
    InsufficientMargin { vertex: String, radius: usize },
    /// A computation needs a numeric backend the measure does not provide.
    #[error("backend mismatch: {0}")]
    Backend(String),
    /// A quadrature or series failed its own accuracy guard.
    #[error("accuracy guard tripped: {0}")]
    Accuracy(String),
    /// An input parameter is outside the admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The submersion axioms fail.
    #[error("submersion invalid: {0}")]
    Submersion(String),
    /// A rationalization threshold fails at some vertex.
    #[error("rationalization threshold fails at vertex {vertex}: {reason}")]
    Threshold { vertex: String, reason: String },
    /// Reading or writing an artifact failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Writing a CSV artifact failed.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// Reading or writing JSON failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
