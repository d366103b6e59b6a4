use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} is out of range 1..={p}")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },

    #[error("graph is disconnected: node {node} is unreachable from node 1")]
    Disconnected { node: usize },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("grid side {side} to the power {dim} is not {p}")]
    GridSize { dim: usize, side: usize, p: usize },

    #[error("no connected Erdos-Renyi graph with p={p}, prob={prob} after {attempts} attempts")]
    ErNotConnected { p: usize, prob: f64, attempts: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid series `{unit}`: {reason}")]
    InvalidSeries { unit: String, reason: String },

    #[error("zero variance in training residuals for `{unit}`")]
    ZeroVariance { unit: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
