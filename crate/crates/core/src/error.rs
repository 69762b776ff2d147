use thiserror::Error;

/// Errors raised by construction, enumeration and certification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: entry ({row},{col}) deviates by {deviation:e}")]
    NotSymmetric { row: usize, col: usize, deviation: f64 },

    #[error("matrix is not positive definite: Cholesky pivot {index} is {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("translate {index} lies on the lattice (coincides with the origin coset)")]
    TranslateAtOrigin { index: usize },

    #[error("translates {first} and {second} coincide modulo Z^d")]
    CoincidentTranslates { first: usize, second: usize },

    #[error("degenerate minimum {lambda:e}: points of the periodic set coincide")]
    DegenerateMinimum { lambda: f64 },

    #[error("dimension guard exceeded: d = {dim} (max {max_dim}), m = {cosets} (max {max_cosets})")]
    DimensionGuard {
        dim: usize,
        max_dim: usize,
        cosets: usize,
        max_cosets: usize,
    },

    #[error("more than {cap} minimal triples; refusing to continue")]
    TooManyTriples { cap: usize },

    #[error("invalid triple: {0}")]
    InvalidTriple(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("not a representation of the given lattice: {0}")]
    RepresentationMismatch(String),

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("index {index} exceeds the sublattice guard {max}")]
    IndexTooLarge { index: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
