//! Central numerical tolerances.
//!
//! All thresholds used by constructors and decision procedures live here so
//! that callers and tests agree on what "equal" means at each layer.  The
//! values assume double precision and ambient dimension at most 64.

/// Acceptance threshold for structural constructors (`SkewHermitian`,
/// `Unitary`, frame orthonormality).  Leaves headroom above machine epsilon
/// accumulated over dimension <= 64.
pub const TOL_CONSTRUCT: f64 = 1e-12;

/// Smallest singular value accepted by polar decompositions and other
/// inversions; anything at or below is reported as a singular factor.
pub const TOL_SINGULAR: f64 = 1e-10;

/// Exclusion radius around -1 for the principal logarithm of a unitary.
/// Eigenvalues within this distance of the branch cut are rejected.
pub const TOL_LOG_GAP: f64 = 1e-8;

/// Default tolerance for subspace comparisons through principal angles
/// (block matching, isotropy decisions).
pub const TOL_PRINCIPAL_ANGLE: f64 = 1e-8;

/// Relative threshold for clustering eigenvalues of a hermitian part when
/// diagonalising normal matrices.
pub const TOL_CLUSTER: f64 = 1e-7;

/// Ambient dimension cap for dense superoperator matricization (n^2 x n^2).
pub const MAX_MATRICIZE_DIM: usize = 64;

/// Hard cap on covering-fiber enumeration.
pub const FIBER_CAP: usize = 10_000;
