//! Spectral link between the unitary orbit of a normal matrix and the
//! orbit of the pinching induced by its eigenprojections: the eigenvalue
//! gap inequality, the norm-one generators with vanishing operator norm,
//! and the block-swap unitaries that separate the two orbit topologies.

use crate::error::{Error, Result};
use crate::linalg::{
    diagonalize_normal, max_abs, op_norm, outer, CMatrix, Complex64, SkewHermitian, Unitary,
};
use crate::norms::SymmetricNorm;
use crate::pinching::{conjugate, OrbitPoint, ProjectionFamily};
use crate::tol;

/// Orbit displacement of a conjugation by `e^z`: writing `e = e^z`,
/// `L_e Q L_{e*} - Q = (L_e - 1) Q L_{e*} + Q (L_{e*} - 1)`, and each term
/// is bounded by `|| e - 1 ||_op <= e^{|| z ||_op} - 1`.
pub fn expm_displacement_bound(generator_op_norm: f64) -> f64 {
    2.0 * (generator_op_norm.exp() - 1.0)
}

/// A normal matrix `a = sum_i lambda_i p_i` described by its distinct
/// nonzero eigenvalues, their multiplicities, and the kernel rank; the
/// eigenprojections form the derived pinching family (kernel = complement
/// block).  Blocks are sorted by descending eigenvalue modulus.
#[derive(Debug, Clone)]
pub struct NormalOperatorSpec {
    eigenvalues: Vec<Complex64>,
    multiplicities: Vec<usize>,
    kernel_rank: usize,
    fam: ProjectionFamily,
}

fn sort_key(l: &Complex64) -> (f64, f64, f64) {
    (l.norm(), l.re, l.im)
}

impl NormalOperatorSpec {
    /// Builds the spec on the canonical coordinate family: eigenvalues
    /// sorted by descending modulus occupy leading coordinates block by
    /// block, the kernel sits at the end.
    pub fn from_eigenvalues(
        eigenvalues: Vec<Complex64>,
        multiplicities: Vec<usize>,
        kernel_rank: usize,
    ) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != multiplicities.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} eigenvalues vs {} multiplicities",
                    eigenvalues.len(),
                    multiplicities.len()
                ),
            });
        }
        let scale = eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
        for (i, l) in eigenvalues.iter().enumerate() {
            if l.norm() <= tol::TOL_CLUSTER * scale {
                return Err(Error::InvalidNorm {
                    context: format!("eigenvalue {i} is numerically zero; use kernel_rank"),
                });
            }
            for m in eigenvalues.iter().skip(i + 1) {
                if (l - m).norm() <= tol::TOL_CLUSTER * scale {
                    return Err(Error::InvalidNorm {
                        context: format!("eigenvalues {l} and {m} are not distinct"),
                    });
                }
            }
        }
        if multiplicities.iter().any(|&m| m == 0) {
            return Err(Error::EmptyBlock { index: 0 });
        }
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&i, &j| {
            sort_key(&eigenvalues[j]).partial_cmp(&sort_key(&eigenvalues[i])).unwrap()
        });
        let eigenvalues: Vec<Complex64> = order.iter().map(|&i| eigenvalues[i]).collect();
        let multiplicities: Vec<usize> = order.iter().map(|&i| multiplicities[i]).collect();
        let dim: usize = multiplicities.iter().sum::<usize>() + kernel_rank;
        let fam = ProjectionFamily::canonical(dim, &multiplicities)?;
        Ok(Self { eigenvalues, multiplicities, kernel_rank, fam })
    }

    fn from_parts(
        eigenvalues: Vec<Complex64>,
        multiplicities: Vec<usize>,
        kernel_rank: usize,
        fam: ProjectionFamily,
    ) -> Self {
        Self { eigenvalues, multiplicities, kernel_rank, fam }
    }

    pub fn dim(&self) -> usize {
        self.fam.dim()
    }

    /// Number of distinct nonzero eigenvalues `w`.
    pub fn block_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn kernel_rank(&self) -> usize {
        self.kernel_rank
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn family(&self) -> &ProjectionFamily {
        &self.fam
    }

    /// `lambda_i` for `i = 1..=w`; index 0 is the kernel eigenvalue 0.
    pub fn eigenvalue(&self, i: usize) -> Result<Complex64> {
        if i == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.eigenvalues.get(i - 1).copied().ok_or_else(|| Error::IndexOutOfRange {
            index: i,
            context: format!("spec has {} eigenvalue blocks", self.eigenvalues.len()),
        })
    }

    /// Reconstructs `a = sum_i lambda_i p_i`.
    pub fn matrix(&self) -> Result<CMatrix> {
        let n = self.dim();
        let mut a = CMatrix::zeros(n, n);
        for (i, l) in self.eigenvalues.iter().enumerate() {
            a += self.fam.projection(i + 1)? * *l;
        }
        Ok(a)
    }
}

/// Clusters the spectrum of a normal matrix into eigenprojections.
///
/// Eigenvalues within `tol_cluster` (relative to the spectral radius) of
/// each other merge into one block; clusters at the origin form the kernel
/// complement.  Blocks are sorted by descending modulus.
pub fn spectral_family(a: &CMatrix, tol_cluster: f64) -> Result<NormalOperatorSpec> {
    let (lambdas, vectors) = diagonalize_normal(a, 1e-10)?;
    let scale = lambdas.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let threshold = tol_cluster * scale;
    // Greedy clustering against running centroids.
    let mut centers: Vec<Complex64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (idx, l) in lambdas.iter().enumerate() {
        let found = centers.iter().position(|c| (c - l).norm() <= threshold);
        match found {
            Some(c) => {
                members[c].push(idx);
                let k = members[c].len() as f64;
                centers[c] = centers[c] * Complex64::new((k - 1.0) / k, 0.0)
                    + l * Complex64::new(1.0 / k, 0.0);
            }
            None => {
                centers.push(*l);
                members.push(vec![idx]);
            }
        }
    }
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&i, &j| sort_key(&centers[j]).partial_cmp(&sort_key(&centers[i])).unwrap());
    let mut eigenvalues = Vec::new();
    let mut multiplicities = Vec::new();
    let mut frames = Vec::new();
    let mut kernel_rank = 0usize;
    let n = a.nrows();
    for &c in &order {
        let cols = &members[c];
        let mut frame = CMatrix::zeros(n, cols.len());
        for (out_col, &in_col) in cols.iter().enumerate() {
            frame.set_column(out_col, &vectors.column(in_col));
        }
        if centers[c].norm() <= threshold {
            kernel_rank += cols.len();
            // Kernel vectors land in the complement automatically.
            continue;
        }
        eigenvalues.push(centers[c]);
        multiplicities.push(cols.len());
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::InvalidNorm {
            context: "the matrix is numerically zero; no eigenprojection blocks".into(),
        });
    }
    let fam = ProjectionFamily::new(frames)?;
    Ok(NormalOperatorSpec::from_parts(eigenvalues, multiplicities, kernel_rank, fam))
}

/// One `(i, j)` entry of the gap-inequality report.
#[derive(Debug, Clone, Copy)]
pub struct GapRow {
    pub i: usize,
    pub j: usize,
    /// `|| p_i u p_j ||_Phi`
    pub lhs: f64,
    /// `|lambda_i - lambda_j|^{-1} || ua - au ||_Phi`
    pub rhs: f64,
    /// `max | p_i (ua - au) p_j - (lambda_j - lambda_i) p_i u p_j |`
    pub identity_residual: f64,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// `|| ua - au ||_Phi`
    pub commutator_norm: f64,
    pub max_identity_residual: f64,
    pub all_hold: bool,
}

/// Verifies the eigenvalue-gap inequality
/// `|| p_i u p_j ||_Phi <= |lambda_i - lambda_j|^{-1} || ua - au ||_Phi`
/// together with the exact identity
/// `p_i (ua - au) p_j = (lambda_j - lambda_i) p_i u p_j` behind it, over
/// all pairs `i != j` including the kernel eigenvalue 0.
pub fn gap_inequality_check(
    spec: &NormalOperatorSpec,
    u: &Unitary,
    norm: &SymmetricNorm,
) -> Result<GapReport> {
    if u.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("unitary dimension {} vs spec dimension {}", u.dim(), spec.dim()),
        });
    }
    let a = spec.matrix()?;
    let c = u.matrix() * &a - &a * u.matrix();
    let commutator_norm = norm.ideal_norm(&c);
    let fam = spec.family();
    let mut rows = Vec::new();
    let mut max_identity_residual: f64 = 0.0;
    let mut all_hold = true;
    for i in 0..=spec.block_count() {
        if fam.rank(i)? == 0 {
            continue;
        }
        let p_i = fam.projection(i)?;
        let l_i = spec.eigenvalue(i)?;
        for j in 0..=spec.block_count() {
            if i == j || fam.rank(j)? == 0 {
                continue;
            }
            let p_j = fam.projection(j)?;
            let l_j = spec.eigenvalue(j)?;
            let block = &p_i * u.matrix() * &p_j;
            let lhs = norm.ideal_norm(&block);
            let gap = (l_i - l_j).norm();
            let rhs = commutator_norm / gap;
            let residual = max_abs(&(&p_i * &c * &p_j - &block * (l_j - l_i)));
            max_identity_residual = max_identity_residual.max(residual);
            all_hold &= lhs <= rhs + 1e-10;
            rows.push(GapRow { i, j, lhs, rhs, identity_residual: residual });
        }
    }
    Ok(GapReport { rows, commutator_norm, max_identity_residual, all_hold })
}

/// Where the orthonormal system of `gap_sequence_zk` lives.
#[derive(Debug, Clone, Copy)]
pub enum ZkPlacement {
    /// `xi_m` is the first basis vector of block `m`, across `2k`
    /// consecutive rank-one-or-larger blocks.
    GrowingW,
    /// Odd-indexed vectors come from `first`, even-indexed from `second`;
    /// both blocks need rank at least `k`.
    TwoBlocks { first: usize, second: usize },
}

/// A norm-one skew generator with small operator norm.
#[derive(Debug, Clone)]
pub struct ZkVector {
    pub z: SkewHermitian,
    /// `|| z ||_Phi`, equal to 1 by construction.
    pub phi_norm: f64,
    /// `|| z ||_op = a_{2k}^{-1}`.
    pub op_norm: f64,
    /// Set when `a_{2k} = 1`, i.e. the norm is the operator norm and the
    /// construction cannot shrink.
    pub degenerate: bool,
}

/// Builds `z_k = a_{2k}^{-1} sum_{i=1}^{k} (xi_{2i-1} xi_{2i}* - xi_{2i}
/// xi_{2i-1}*)`: all `2k` singular values equal `a_{2k}^{-1}`, so
/// `|| z_k ||_Phi = 1` while `|| z_k ||_op = a_{2k}^{-1}`; the generator
/// has zero block diagonal.
pub fn gap_sequence_zk(
    fam: &ProjectionFamily,
    placement: &ZkPlacement,
    norm: &SymmetricNorm,
    k: usize,
) -> Result<ZkVector> {
    if k == 0 {
        return Err(Error::DimensionTooSmall { context: "k must be at least 1".into() });
    }
    let n = fam.dim();
    if n < 2 * k {
        return Err(Error::DimensionTooSmall {
            context: format!("dimension {n} cannot host an orthonormal system of size {}", 2 * k),
        });
    }
    let xi: Vec<crate::linalg::CVector> = match placement {
        ZkPlacement::GrowingW => {
            if fam.block_count() < 2 * k {
                return Err(Error::DimensionTooSmall {
                    context: format!(
                        "placement needs {} blocks, family has {}",
                        2 * k,
                        fam.block_count()
                    ),
                });
            }
            (1..=2 * k).map(|m| fam.basis(m).map(|b| b.column(0).into_owned())).collect::<Result<_>>()?
        }
        ZkPlacement::TwoBlocks { first, second } => {
            if first == second {
                return Err(Error::BadVariant {
                    context: "the two designated blocks must differ".into(),
                });
            }
            for &b in [first, second] {
                if b == 0 || b > fam.block_count() {
                    return Err(Error::IndexOutOfRange {
                        index: b,
                        context: format!("family has blocks 1..={}", fam.block_count()),
                    });
                }
                if fam.rank(b)? < k {
                    return Err(Error::DimensionTooSmall {
                        context: format!("block {b} has rank {} < k = {k}", fam.rank(b)?),
                    });
                }
            }
            let fa = fam.basis(*first)?;
            let fb = fam.basis(*second)?;
            (0..2 * k)
                .map(|m| {
                    if m % 2 == 0 {
                        fa.column(m / 2).into_owned()
                    } else {
                        fb.column(m / 2).into_owned()
                    }
                })
                .collect()
        }
    };
    let a2k = norm.phi_counting(2 * k);
    let mut z = CMatrix::zeros(n, n);
    for i in 1..=k {
        let odd = &xi[2 * i - 2];
        let even = &xi[2 * i - 1];
        z += outer(odd, even) - outer(even, odd);
    }
    z /= Complex64::new(a2k, 0.0);
    let z = SkewHermitian::new(z)?;
    let phi_norm = norm.ideal_norm(z.matrix());
    Ok(ZkVector {
        op_norm: op_norm(z.matrix()),
        phi_norm,
        degenerate: (a2k - 1.0).abs() < 1e-12,
        z,
    })
}

/// The rank-two perturbation of the identity swapping the first basis
/// vectors of blocks `n+1` and `n+2`:
/// `u_n = xi_{n+2} xi_{n+1}* + xi_{n+1} xi_{n+2}* + (1 - xi_{n+1} xi_{n+1}*
/// - xi_{n+2} xi_{n+2}*)`.
pub fn swap_sequence_un(
    spec: &NormalOperatorSpec,
    n: usize,
    bases: Option<&[CMatrix]>,
) -> Result<Unitary> {
    let w = spec.block_count();
    if n + 2 > w {
        return Err(Error::IndexOutOfRange {
            index: n,
            context: format!("swap needs blocks {} and {}, family has 1..={w}", n + 1, n + 2),
        });
    }
    let fam = spec.family();
    let column = |block: usize| -> Result<crate::linalg::CVector> {
        match bases {
            Some(b) => {
                let m = b.get(block).ok_or_else(|| Error::IndexOutOfRange {
                    index: block,
                    context: "bases list is too short".into(),
                })?;
                if m.nrows() != fam.dim() || m.ncols() == 0 {
                    return Err(Error::DimensionMismatch {
                        context: format!("basis {block} has the wrong shape"),
                    });
                }
                let v = m.column(0).into_owned();
                if (&fam.projection(block)? * &v - &v).norm() > tol::TOL_PRINCIPAL_ANGLE {
                    return Err(Error::BadVariant {
                        context: format!("basis vector is not in the range of block {block}"),
                    });
                }
                Ok(v.unscale(v.norm()))
            }
            None => Ok(fam.basis(block)?.column(0).into_owned()),
        }
    };
    let xi = column(n + 1)?;
    let eta = column(n + 2)?;
    let dim = fam.dim();
    let mut u = CMatrix::identity(dim, dim);
    u -= outer(&xi, &xi) + outer(&eta, &eta);
    u += outer(&xi, &eta) + outer(&eta, &xi);
    Unitary::new(u)
}

/// One row of the topology-mismatch table.
#[derive(Debug, Clone, Copy)]
pub struct GapTableRow {
    pub k: usize,
    /// `|| z_k ||_op = a_{2k}^{-1}`
    pub op_norm: f64,
    /// `|| z_k ||_Phi`, pinned at 1
    pub phi_norm: f64,
    /// `super_norm_s2` of the `e^{z_k}`-conjugated pinching minus the base
    pub displacement: f64,
    /// `2 (e^{||z_k||_op} - 1)`, an upper bound for the displacement
    pub bound: f64,
    pub degenerate: bool,
}

/// Scenario for the table: consecutive rank-one blocks or two large blocks.
#[derive(Debug, Clone, Copy)]
pub enum GapScenario {
    GrowingW,
    TwoLargeBlocks,
}

/// Tabulates the finite-dimensional shadow of the topology mismatch: the
/// orbit displacement of `e^{z_k}` shrinks like `2(e^{1/a_{2k}} - 1)` while
/// `|| z_k ||_Phi` stays pinned at 1.
pub fn topology_gap_table(
    norm: &SymmetricNorm,
    k_max: usize,
    scenario: GapScenario,
) -> Result<Vec<GapTableRow>> {
    if k_max == 0 {
        return Err(Error::DimensionTooSmall { context: "k_max must be at least 1".into() });
    }
    let dim = 2 * k_max;
    let (fam, placement) = match scenario {
        GapScenario::GrowingW => {
            (ProjectionFamily::canonical(dim, &vec![1; dim])?, ZkPlacement::GrowingW)
        }
        GapScenario::TwoLargeBlocks => (
            ProjectionFamily::canonical(dim, &[k_max, k_max])?,
            ZkPlacement::TwoBlocks { first: 1, second: 2 },
        ),
    };
    let base = OrbitPoint::base_point(&fam);
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let zk = gap_sequence_zk(&fam, &placement, norm, k)?;
        let moved = conjugate(&crate::linalg::expm_skew(&zk.z), &base)?;
        let displacement = crate::pinching::super_norm_s2(&moved.difference_super(&base))?;
        rows.push(GapTableRow {
            k,
            op_norm: zk.op_norm,
            phi_norm: zk.phi_norm,
            displacement,
            bound: expm_displacement_bound(zk.op_norm),
            degenerate: zk.degenerate,
        });
    }
    Ok(rows)
}
