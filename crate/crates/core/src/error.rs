use thiserror::Error;

#[derive(Debug, Error)]
pub enum RtgError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("pattern length mismatch: {left} vs {right}")]
    PatternLength { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("grid of resolution {resolution}^{dim} overflows")]
    GridOverflow { resolution: usize, dim: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("fraction {0} outside (0, 1)")]
    Fraction(f64),

    #[error("graph needs at least {needed} nodes, has {actual}")]
    TooFewNodes { needed: usize, actual: usize },

    #[error("pattern {0} is not a node of the graph")]
    UnknownPattern(String),

    #[error("degenerate line arrangement: {0}")]
    Degenerate(String),

    #[error("graph format error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("malformed graph: {0}")]
    Malformed(String),

    #[error("need at least 2 values to aggregate, got {0}")]
    TooFewValues(usize),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("integer overflow evaluating {0}")]
    Overflow(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RtgError>;
