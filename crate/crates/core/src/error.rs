use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate entry at layer {layer}, row {row}, col {col}")]
    DuplicateEntry { layer: usize, row: usize, col: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pruning disconnects every input from the output")]
    Disconnected,

    #[error("polynomial is not multilinear")]
    NotMultilinear,

    #[error("oracle variable cap exceeded: {nvars} variables > cap {cap}")]
    OracleCap { nvars: usize, cap: usize },

    #[error("term cap exceeded: {needed} certificate terms > cap {cap} ({detail})")]
    TermCap { needed: u128, cap: usize, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("LP iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
