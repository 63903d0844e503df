use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("element {value:#x} is outside GF(2^{w})")]
    ElementOutOfRange { value: u32, w: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear system has no solution")]
    NoSolution,

    #[error("matrix is singular")]
    Singular,

    #[error("invalid code parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("erasure pattern {0:?} is not recoverable")]
    Unrecoverable(Vec<String>),

    #[error("received symbols are inconsistent with the code")]
    Inconsistent,

    #[error("enumeration needs {needed} patterns, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("construction failed after {attempts} attempts: {reason}")]
    ConstructionFailed { attempts: usize, reason: String },

    #[error("invalid merge spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("node role violation at {node}: {reason}")]
    RoleViolation { node: String, reason: String },

    #[error("conversion output differs from direct encoding at node {node}")]
    ConversionIncorrect { node: String },

    #[error("new node {node} is not a function of the downloaded data")]
    CoordinatorViolation { node: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("achieved read bandwidth {achieved} is below the lower bound {bound}")]
    BoundViolation { achieved: String, bound: String },

    #[error("could not sample an instance satisfying the hypothesis after {attempts} attempts")]
    HypothesisUnsatisfied { attempts: usize },

    #[error("malformed input: {0}")]
    Malformed(String),
}
