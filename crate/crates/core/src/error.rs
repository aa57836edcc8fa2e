use thiserror::Error;

/// Errors raised by the HODLR arithmetic, the sign iteration, the column
/// selection and the divide-and-conquer driver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("incompatible block partitions: {0}")]
    IncompatiblePartition(String),

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {mismatch:e}")]
    NonSymmetric { row: usize, col: usize, mismatch: f64 },

    /// A non-positive pivot showed up in a dense leaf during H-Cholesky.
    #[error("matrix is not positive definite: pivot {pivot} of the leaf at offset {offset} (depth {depth}) is {value:e}")]
    IndefiniteMatrix {
        depth: usize,
        offset: usize,
        pivot: usize,
        value: f64,
    },

    #[error("triangular factor is singular at diagonal index {index}")]
    SingularTriangular { index: usize },

    #[error("matrix is not positive semidefinite: diagonal update {value:e} at pivot {pivot}")]
    NotPsd { pivot: usize, value: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("index set is not ordered by block: {0}")]
    UnorderedIndices(String),

    #[error("shift is numerically an eigenvalue; inverse iteration failed: {0}")]
    ShiftTooCloseToEigenvalue(String),

    /// The shift does not separate the spectrum by a gap the Cholesky-based
    /// sign iteration can resolve.
    #[error("spectral gap too small at node {} (shift {shift:e}, iteration {iteration}): {reason}", node_name(node))]
    GapTooSmall {
        node: String,
        shift: f64,
        iteration: usize,
        reason: String,
    },

    #[error("sign iteration did not converge within {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("range completion found only {found} of {needed} independent directions")]
    CompletionDeficient { needed: usize, found: usize },

    #[error("selected {selected} columns but the projector has rank {rank}")]
    SelectionExceedsRank { selected: usize, rank: usize },

    #[error("degenerate split at node {}: shift {shift:e} gives nu = {nu} of {n}", node_name(node))]
    DegenerateSplit {
        node: String,
        shift: f64,
        nu: usize,
        n: usize,
    },

    #[error("recursion depth {0} exceeded")]
    DepthExceeded(usize),

    #[error("dense materialization of dimension {n} exceeds the cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("dense eigensolver did not converge for eigenvalue {0}")]
    EigenNoConvergence(usize),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Nodes are named by their path from the root, `0` for the lower half.
fn node_name(path: &str) -> String {
    if path.is_empty() {
        "root".into()
    } else {
        format!("'{path}'")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
