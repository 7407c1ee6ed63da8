use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("negative weight {weight} on edge {from} -> {to}")]
    NegativeWeight { from: String, to: String, weight: f64 },

    #[error("vertex {0} is not in the graph")]
    UnknownVertex(String),

    #[error("edge {0} -> {1} is not an edge of the parent graph")]
    UnknownEdge(String, String),

    #[error("cannot parse vertex `{0}`")]
    VertexSyntax(String),

    #[error("operation not supported for this graph: {0}")]
    Unsupported(String),

    #[error("configuration is empty")]
    EmptyConfiguration,

    #[error("population ceiling of {0} particles exceeded")]
    PopulationCeiling(u64),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("tuning failed: {0}")]
    TuningFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
