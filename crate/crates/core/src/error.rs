use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into input validation problems (the caller handed us
/// something that violates a contract) and numeric failures (a routine could
/// not reach its guarantee). [`Error::is_validation`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("distance matrix is asymmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("negative or non-finite distance at ({i}, {j}): {value}")]
    InvalidEntry { i: usize, j: usize, value: f64 },

    #[error("nonzero diagonal entry at ({i}, {i}): {value}")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("zero distance between distinct points ({i}, {j})")]
    ZeroDistance { i: usize, j: usize },

    #[error("triangle inequality violated: d({i},{k}) = {direct} > d({i},{j}) + d({j},{k}) = {detour}")]
    TriangleViolation { i: usize, j: usize, k: usize, direct: f64, detour: f64 },

    #[error("graph is disconnected: no path between {0} and {1}")]
    Disconnected(usize, usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("weights are not a probability vector: {0}")]
    NotSimplex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive semidefinite: eigenvalue {0}")]
    NotPsd(f64),

    #[error("transport plan is not optimal: {0}")]
    NotOptimal(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numeric(_) | Error::NotOptimal(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
