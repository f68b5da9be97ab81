use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    PointOutsideDomain { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (eigenvalues {min_eig:e} .. {max_eig:e})")]
    MetricNotPositiveDefinite {
        point: Vec<f64>,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("{field} cannot supply jets of order {requested} (available: {available})")]
    JetOrderUnsupported {
        field: String,
        requested: usize,
        available: usize,
    },

    #[error("dimension mismatch: {what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("chart dimension {0} is unsupported (must be 2..=4)")]
    DimensionUnsupported(usize),

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("unknown preset manifold `{0}`")]
    UnknownPreset(String),

    #[error("bad preset parameters: {0}")]
    BadParams(String),

    #[error("unknown case `{0}`")]
    CaseUnknown(String),

    #[error("case {case} requires binding `{binding}`")]
    MissingBinding { case: String, binding: String },

    #[error("case {case} does not accept binding `{binding}`")]
    ExtraBinding { case: String, binding: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
