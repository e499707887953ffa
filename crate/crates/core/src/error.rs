use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    Invalid(ValidationReport),

    #[error("node index {index} out of range for {num_nodes} nodes")]
    IndexOutOfRange { index: usize, num_nodes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("dual iterate on conjugate boundary (coordinate {coordinate})")]
    ConjugateBoundary { coordinate: usize },

    #[error("iterate left dual domain")]
    LeftDualDomain,

    #[error("invalid dual prices: {0}")]
    InvalidDualPrices(String),

    #[error("edge oracle domain error at w = {w}")]
    EdgeOracleDomain { w: f64 },

    #[error("unbounded edge support")]
    UnboundedEdge,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("oracle scale exceeded: {0}")]
    OracleScaleExceeded(String),

    #[error("field is not finite at probe along coordinate {coordinate}")]
    NonFiniteProbe { coordinate: usize },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
