use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum BmcError {
    #[error("malformed vertex `{0}` for this state space")]
    MalformedVertex(String),

    #[error("vertex word of length {len} exceeds the packing limit {max} for this alphabet")]
    VertexOverflow { len: usize, max: usize },

    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("truncation with {vertices} vertices exceeds the memory bound of {bound} vertices")]
    TruncationTooLarge { vertices: usize, bound: usize },

    #[error("invalid offspring distribution: {0}")]
    InvalidPmf(String),

    #[error("branching ratio mismatch: state {state} has mean {mean}, expected {rho}")]
    BranchingRatioMismatch { state: String, mean: f64, rho: f64 },

    #[error("branching law undefined at state {0}")]
    UndefinedState(String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("function undefined at support point {0}")]
    UndefinedFunction(String),

    #[error("particle count overflow")]
    CountOverflow,

    #[error("support too large for exhaustive enumeration: {0}")]
    UnboundedSupport(String),

    #[error("kernel is not transient (return probability {return_probability})")]
    NotTransient { return_probability: f64 },

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("fixed-point iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("depth {depth} exceeds the configured bound {bound}")]
    DepthTooLarge { depth: usize, bound: usize },

    #[error("sup-tail envelope is not summable: {0}")]
    EnvelopeFailure(String),

    #[error("spectral radius bracket [{lower}, {upper}] is wider than the requested tolerance {tolerance}")]
    BracketTooWide { lower: f64, upper: f64, tolerance: f64 },

    #[error("truncated trajectory fraction {fraction} exceeds the limit {limit}")]
    TooManyTruncated { fraction: f64, limit: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BmcError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        BmcError::Config { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, BmcError>;
