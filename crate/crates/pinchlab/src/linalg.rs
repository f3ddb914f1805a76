//! Dense complex linear algebra: validated wrappers and matrix functions.
//!
//! Matrix functions (`expm_skew`, `logm_unitary`) go through eigendecomposition
//! of hermitian parts rather than power series, which keeps branch control for
//! the logarithm explicit.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tol;

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest entry modulus; 0 for empty matrices.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, e| acc.max(e.norm()))
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |acc: f64, s| acc.max(*s))
}

/// Frobenius norm, i.e. the Schatten-2 norm.
pub fn s2_norm(m: &CMatrix) -> f64 {
    m.norm()
}

/// Rank-one matrix `x y*`, the operator `v -> <v, y> x`.
pub fn outer(x: &CVector, y: &CVector) -> CMatrix {
    x * y.adjoint()
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    for (row, col) in (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| (r, c))) {
        let e = m[(row, col)];
        if !e.re.is_finite() || !e.im.is_finite() {
            return Err(Error::NotFinite { row, col });
        }
    }
    Ok(())
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Skew-hermitian matrix: `m* = -m` within [`tol::TOL_CONSTRUCT`].
#[derive(Debug, Clone)]
pub struct SkewHermitian {
    m: CMatrix,
}

impl SkewHermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let defect = max_abs(&(&m + m.adjoint()));
        if defect > tol::TOL_CONSTRUCT {
            return Err(Error::NotSkewHermitian { defect });
        }
        // Symmetrise so the invariant holds exactly from here on.
        let exact = (&m - m.adjoint()).scale(0.5);
        Ok(Self { m: exact })
    }

    /// Skew part `(m - m*) / 2` of an arbitrary square matrix.
    pub fn skew_part(m: &CMatrix) -> Self {
        Self { m: (m - m.adjoint()).scale(0.5) }
    }

    pub fn zero(n: usize) -> Self {
        Self { m: CMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { m: self.m.scale(t) }
    }
}

/// Unitary matrix: `m m* = 1` within [`tol::TOL_CONSTRUCT`].
#[derive(Debug, Clone)]
pub struct Unitary {
    m: CMatrix,
}

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let n = m.nrows();
        let defect = max_abs(&(&m * m.adjoint() - CMatrix::identity(n, n)));
        if defect > tol::TOL_CONSTRUCT {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self { m })
    }

    /// Wraps a product of already validated unitaries; the invariant is
    /// preserved by construction.
    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// Product `self * rhs`.
    pub fn compose(&self, rhs: &Unitary) -> Self {
        Self { m: &self.m * &rhs.m }
    }

    /// Conjugation `u x u*`.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        &self.m * x * self.m.adjoint()
    }
}

/// Full singular value decomposition `m = u diag(s) v*` with square unitary
/// factors and `s` nonincreasing of length `min(rows, cols)`.
pub fn svd(m: &CMatrix) -> Result<(Unitary, Vec<f64>, Unitary)> {
    ensure_finite(m)?;
    let (rows, cols) = (m.nrows(), m.ncols());
    let svd = m.clone().svd(true, true);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let u_thin = svd.u.expect("u requested");
    let v_thin = svd.v_t.expect("v_t requested").adjoint();
    let u = Unitary::new(complete_to_square(&u_thin, rows))?;
    let v = Unitary::new(complete_to_square(&v_thin, cols))?;
    Ok((u, s, v))
}

/// Extends an n x k matrix with orthonormal columns to an n x n unitary.
fn complete_to_square(f: &CMatrix, n: usize) -> CMatrix {
    let k = f.ncols();
    if k == n {
        return f.clone();
    }
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((0, 0), (n, k)).copy_from(f);
    out.view_mut((0, k), (n, n - k)).copy_from(&complement_basis(f));
    out
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// n x k matrix with orthonormal columns; returns an n x (n-k) matrix.
pub fn complement_basis(f: &CMatrix) -> CMatrix {
    let n = f.nrows();
    let k = f.ncols();
    if k == 0 {
        return CMatrix::identity(n, n);
    }
    // Eigenvectors of 1 - f f* for eigenvalue 1 span the complement.
    let proj = CMatrix::identity(n, n) - f * f.adjoint();
    let (vals, vecs) = hermitian_eigen(&proj);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut out = CMatrix::zeros(n, n - k);
    for (j, &src) in order.iter().take(n - k).enumerate() {
        out.set_column(j, &vecs.column(src));
    }
    out
}

/// Polar decomposition `m = u a` with `u` unitary and `a = (m* m)^{1/2}`
/// hermitian positive definite.  Requires the smallest singular value to
/// exceed [`tol::TOL_SINGULAR`].
pub fn polar(m: &CMatrix) -> Result<(Unitary, CMatrix)> {
    let n = ensure_square(m)?;
    let (_, s, _) = svd(m)?;
    let smallest = s.last().copied().unwrap_or(0.0);
    if smallest <= tol::TOL_SINGULAR {
        return Err(Error::SingularFactor { smallest, threshold: tol::TOL_SINGULAR });
    }
    // Scaled Newton iteration X <- (mu X + (mu X)^{-*}) / 2 converges to
    // the isometric polar factor of the start matrix itself, so the result
    // does not inherit the accuracy of any spectral factorisation.
    let mut x = m.clone();
    for _ in 0..40 {
        let inv_adjoint = x
            .clone()
            .try_inverse()
            .ok_or(Error::SingularFactor { smallest, threshold: tol::TOL_SINGULAR })?
            .adjoint();
        let mu = (inv_adjoint.norm() / x.norm()).sqrt();
        let next = (x.scale(mu) + inv_adjoint.unscale(mu)).scale(0.5);
        let shift = max_abs(&(&next - &x));
        x = next;
        if shift <= 1e-15 * (n as f64) {
            break;
        }
    }
    let unitary = Unitary::new_unchecked(x);
    let a = unitary.matrix().adjoint() * m;
    let a = (&a + a.adjoint()).scale(0.5);
    Ok((unitary, a))
}

/// Eigendecomposition of a hermitian matrix: ascending real eigenvalues and
/// a unitary matrix of eigenvectors as columns.
pub(crate) fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut vecs = eig.eigenvectors;
    // The backend occasionally stops with off-diagonal residue far above
    // machine precision; polish with cyclic complex Jacobi sweeps on the
    // rotated matrix until the residual is negligible.
    let mut r = vecs.adjoint() * h * &vecs;
    let scale = (0..n).map(|k| r[(k, k)].norm()).fold(f64::MIN_POSITIVE, f64::max);
    for _ in 0..8 {
        let off = (0..n)
            .flat_map(|p| (0..n).map(move |q| (p, q)))
            .filter(|&(p, q)| p != q)
            .map(|(p, q)| r[(p, q)].norm())
            .fold(0.0f64, f64::max);
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = r[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-18 * scale {
                    continue;
                }
                // Rotate (p, q) with J = diag(1, e^{-i arg}) . Givens so the
                // conjugated 2x2 block becomes diagonal.
                let phase = apq / Complex64::new(mag, 0.0);
                let tau = (r[(q, q)].re - r[(p, p)].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let (rkp, rkq) = (r[(k, p)], r[(k, q)]);
                    r[(k, p)] = rkp * jpp + rkq * jqp;
                    r[(k, q)] = rkp * jpq + rkq * jqq;
                    let (vkp, vkq) = (vecs[(k, p)], vecs[(k, q)]);
                    vecs[(k, p)] = vkp * jpp + vkq * jqp;
                    vecs[(k, q)] = vkp * jpq + vkq * jqq;
                }
                for k in 0..n {
                    let (rpk, rqk) = (r[(p, k)], r[(q, k)]);
                    r[(p, k)] = jpp.conj() * rpk + jqp.conj() * rqk;
                    r[(q, k)] = jpq.conj() * rpk + jqq.conj() * rqk;
                }
            }
        }
    }
    let raw_vals: Vec<f64> = (0..n).map(|k| r[(k, k)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[a].total_cmp(&raw_vals[b]));
    let vals: Vec<f64> = order.iter().map(|&i| raw_vals[i]).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        sorted.set_column(j, &vecs.column(src));
    }
    (vals, sorted)
}

/// Unitary exponential of a skew-hermitian matrix via the eigendecomposition
/// of its hermitian multiple `i z`.
pub fn expm_skew(z: &SkewHermitian) -> Unitary {
    let i = Complex64::new(0.0, 1.0);
    let h = z.matrix().map(|e| i * e);
    let (vals, vecs) = hermitian_eigen(&h);
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| Complex64::new(0.0, -l).exp()),
    ));
    Unitary::new_unchecked(&vecs * phases * vecs.adjoint())
}

/// Diagonalises a normal matrix: eigenvalues per column and a unitary of
/// eigenvectors.  The hermitian part is diagonalised first; eigenvalue
/// clusters are then split by the skew part restricted to them.
pub fn diagonalize_normal(a: &CMatrix, normality_tol: f64) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = ensure_square(a)?;
    ensure_finite(a)?;
    let defect = max_abs(&(a * a.adjoint() - a.adjoint() * a));
    if defect > normality_tol {
        return Err(Error::NotNormal { defect });
    }
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    let herm = (a + a.adjoint()).map(|e| e * half);
    let skew = (a - a.adjoint()).map(|e| e * minus_half_i);
    let (hvals, mut vecs) = hermitian_eigen(&herm);
    let spread = hvals.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let gap = tol::TOL_CLUSTER * spread;
    // Split runs of near-equal hermitian eigenvalues using the skew part.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && hvals[end] - hvals[end - 1] <= gap {
            end += 1;
        }
        if end - start > 1 {
            let block = vecs.columns(start, end - start).into_owned();
            let restricted = block.adjoint() * &skew * &block;
            let restricted = (&restricted + restricted.adjoint()).scale(0.5);
            let (_, rot) = hermitian_eigen(&restricted);
            let refined = block * rot;
            vecs.columns_mut(start, end - start).copy_from(&refined);
        }
        start = end;
    }
    let eigenvalues: Vec<Complex64> = (0..n)
        .map(|k| {
            let v = vecs.column(k).into_owned();
            (v.adjoint() * a * v)[(0, 0)]
        })
        .collect();
    Ok((eigenvalues, vecs))
}

/// Principal logarithm of a unitary: the skew-hermitian `z` with eigenvalues
/// `i arg(lambda)` on the eigenspaces of `u`.  Fails if any eigenvalue lies
/// within [`tol::TOL_LOG_GAP`] of the branch cut at -1.
pub fn logm_unitary(u: &Unitary) -> Result<SkewHermitian> {
    let (eigenvalues, vecs) = diagonalize_normal(u.matrix(), tol::TOL_SINGULAR)?;
    let n = u.dim();
    let mut phases = CVector::zeros(n);
    for (k, lambda) in eigenvalues.iter().enumerate() {
        let unit = lambda / lambda.norm();
        let gap = (unit + Complex64::new(1.0, 0.0)).norm();
        if gap < tol::TOL_LOG_GAP {
            return Err(Error::LogBranchFailure { gap });
        }
        phases[k] = Complex64::new(0.0, unit.arg());
    }
    let z = &vecs * CMatrix::from_diagonal(&phases) * vecs.adjoint();
    Ok(SkewHermitian::skew_part(&z))
}

/// Skew-hermitian matrix with independent standard-normal entries, rescaled
/// to unit operator norm.
pub fn random_skew_unit(n: usize, rng: &mut impl Rng) -> SkewHermitian {
    let raw = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let z = SkewHermitian::skew_part(&raw);
    let norm = op_norm(z.matrix());
    if norm == 0.0 {
        return z;
    }
    z.scaled(1.0 / norm)
}

/// Deterministic unitary at geodesic distance `scale` from the identity in
/// operator norm: `exp(scale * z)` for a seeded unit-norm skew direction.
pub fn random_unitary_near_identity(n: usize, scale: f64, seed: u64) -> Unitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = random_skew_unit(n, &mut rng);
    expm_skew(&z.scaled(scale))
}
