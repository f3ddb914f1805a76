//! Error type shared by all library modules.

use thiserror::Error;

/// Errors reported by constructors and operations.
///
/// Numerical routines that merely fail to reach a tolerance (iterative
/// solvers) do not error; they report a `converged` flag in their result.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A square-matrix operation received a non-square input.
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A skew-hermitian wrapper was given a matrix with `m + m*` too large.
    #[error("matrix is not skew-hermitian: max |m + m*| entry = {defect:.3e}")]
    NotSkewHermitian { defect: f64 },

    /// A unitary wrapper was given a matrix with `m m* - 1` too large.
    #[error("matrix is not unitary: max |m m* - 1| entry = {defect:.3e}")]
    NotUnitary { defect: f64 },

    /// A polar decomposition met a (numerically) singular factor.
    #[error("singular factor: smallest singular value {smallest:.3e} <= {threshold:.3e}")]
    SingularFactor { smallest: f64, threshold: f64 },

    /// The principal matrix logarithm is not defined: an eigenvalue sits on
    /// or too close to the branch cut at -1.
    #[error("log branch failure: eigenvalue within {gap:.3e} of -1")]
    LogBranchFailure { gap: f64 },

    /// A custom norming function failed a validation probe.
    #[error("invalid norm: {context}")]
    InvalidNorm { context: String },

    /// Frames of a projection family are not orthonormal or not mutually
    /// orthogonal within tolerance.
    #[error("frames not orthonormal: max defect {defect:.3e} exceeds {tol:.3e}")]
    NotOrthogonal { defect: f64, tol: f64 },

    /// Frame ranks of a projection family add up to more than the ambient
    /// dimension.
    #[error("family overcomplete: ranks sum to {total} in ambient dimension {dim}")]
    OverComplete { total: usize, dim: usize },

    /// A frame with zero columns was supplied.
    #[error("projection family block {index} has rank zero")]
    EmptyBlock { index: usize },

    /// A dense matricization would exceed the supported ambient dimension.
    #[error("ambient dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    /// A tangent-projection variant was given unusable data.
    #[error("bad variant: {context}")]
    BadVariant { context: String },

    /// A block permutation maps between blocks of different rank.
    #[error("rank mismatch: block {from} (rank {from_rank}) cannot map to block {to} (rank {to_rank})")]
    RankMismatch { from: usize, to: usize, from_rank: usize, to_rank: usize },

    /// A fiber enumeration would exceed the hard cap.
    #[error("fiber has {size} elements, exceeding the cap of {cap}")]
    FiberTooLarge { size: usize, cap: usize },

    /// An orbit point carries no conjugating witness but one is required.
    #[error("orbit point has no unitary witness: {context}")]
    MissingWitness { context: String },

    /// An operator expected to be normal is not.
    #[error("matrix is not normal: max |a a* - a* a| entry = {defect:.3e}")]
    NotNormal { defect: f64 },

    /// A construction needs more blocks or rank than the family provides.
    #[error("dimension too small: {context}")]
    DimensionTooSmall { context: String },

    /// A block or basis index is out of range.
    #[error("index {index} out of range: {context}")]
    IndexOutOfRange { index: usize, context: String },

    /// An input matrix contains NaN or infinite entries.
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NotFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
