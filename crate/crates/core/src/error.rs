use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate metric at r = {r}: {detail}")]
    DegenerateMetric { r: f64, detail: String },
    #[error("singular metric matrix (condition number {condition:.3e})")]
    Singular { condition: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("no sign change in bracket [{low}, {high}]: {detail}")]
    Bracket { low: f64, high: f64, detail: String },
    #[error("sample graph is disconnected ({components} components)")]
    Connectivity { components: usize },
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("experiment aborted at i = {i}: {detail}")]
    ExperimentAborted {
        i: u32,
        detail: String,
        spec: Box<crate::constructions::MetricFamilySpec>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
