use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid axis {axis} for tensor of rank {rank}")]
    Axis { axis: usize, rank: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("every sample is ambiguous for top-{k}; the risk set carries no top-k signal")]
    UninformativeRiskSet { k: usize },

    #[error("{0}")]
    InsufficientRiskSet(String),

    #[error("{path}: row {row}: {msg}")]
    Csv { path: String, row: usize, msg: String },

    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("training diverged at step {step}: {msg}")]
    Divergence { step: usize, msg: String },

    #[error("parameter file: {0}")]
    ParamFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
