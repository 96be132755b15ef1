use thiserror::Error;

use crate::tensor::IndexId;

#[derive(Debug, Error)]
pub enum LpdoError {
    #[error("index dimension must be at least 1")]
    ZeroDimension,

    #[error("index id {0} appears more than once in one tensor")]
    DuplicateIndex(IndexId),

    #[error("data length {got} does not match the index grid size {expected}")]
    DataLength { expected: usize, got: usize },

    #[error("shared index {id} has mismatched dimensions {left} and {right}")]
    DimensionMismatch { id: IndexId, left: usize, right: usize },

    #[error("index {0} is not carried by this tensor")]
    UnknownIndex(IndexId),

    #[error("cannot factorize a tensor with zero norm")]
    ZeroTensor,

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("expected rows >= cols, got a {rows}x{cols} matrix")]
    WideMatrix { rows: usize, cols: usize },

    #[error("a chain needs at least one site")]
    EmptyChain,

    #[error("site {site} is out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("bond {bond} is out of range for a chain of {len} sites")]
    BondOutOfRange { bond: usize, len: usize },

    #[error("sites {0:?} are not an adjacent ascending pair")]
    NonAdjacent(Vec<usize>),

    #[error("orthogonality center {center:?} is not on bond {bond}")]
    CenterMisplaced { center: Option<usize>, bond: usize },

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("channel is not trace preserving (max deviation {0:.3e})")]
    NotCptp(f64),

    #[error("matrix is not an isometry (max deviation {0:.3e})")]
    NotIsometric(f64),

    #[error("chains have different lengths: {0} and {1}")]
    LengthMismatch(usize, usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("objective is not finite when probing entry ({row}, {col}) along the {part} part")]
    NonFiniteObjective {
        row: usize,
        col: usize,
        part: &'static str,
    },

    #[error("malformed chain: {0}")]
    MalformedChain(String),

    #[error("{n} qubits exceeds the dense oracle limit of {max}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed bundle: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LpdoError>;
