use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("dense size {size} exceeds cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("local block for multiplier {column} is singular or indefinite (pivot {pivot:e})")]
    SingularLocalBlock { column: usize, pivot: f64 },

    #[error("column {0} of the constraint matrix is empty")]
    EmptyColumn(usize),

    #[error("local block for multiplier {0} has zero norm")]
    ZeroBlockNorm(usize),

    #[error("factorization breakdown at pivot {index} (value {pivot:e}): {context}")]
    FactorizationBreakdown {
        index: usize,
        pivot: f64,
        context: &'static str,
    },

    #[error("leading block singular: {0}")]
    SingularLeadingBlock(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("inner solver has no explicit SPD form")]
    MissingSpdForm,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
