//! Geometry of the unitary orbit of a pinching: isotropy groups, tangent
//! projections, local cross sections and covering fibers.
//!
//! The unitary group acts by `u . P = L_u P L_{u*}`.  Its isotropy contains
//! the block diagonal unitaries `G` and, beyond them, compositions with
//! block permutations that preserve ranks and fix the complement block.

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs, op_norm, outer, polar, CMatrix, CVector, SkewHermitian, Unitary,
};
use crate::pinching::{conjugate, OrbitPoint, ProjectionFamily, SuperOperator};
use crate::tol;

/// A permutation of block labels `0..=w` fixing `0` (the complement block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    images: Vec<usize>,
}

impl BlockPermutation {
    /// Validates that `images` is a bijection of `0..images.len()` with
    /// `images[0] == 0`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        if images.is_empty() || images[0] != 0 {
            return Err(Error::BadVariant {
                context: "a block permutation must fix the complement block 0".into(),
            });
        }
        let mut seen = vec![false; images.len()];
        for &j in &images {
            if j >= images.len() || seen[j] {
                return Err(Error::BadVariant {
                    context: format!("images {images:?} are not a permutation"),
                });
            }
            seen[j] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(block_count: usize) -> Self {
        Self { images: (0..=block_count).collect() }
    }

    /// Number of permutable blocks `w` (labels `1..=w`).
    pub fn block_count(&self) -> usize {
        self.images.len() - 1
    }

    pub fn map(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Self { images }
    }

    /// Checks that mapped blocks have equal rank in `fam`.
    pub fn check_ranks(&self, fam: &ProjectionFamily) -> Result<()> {
        if self.block_count() != fam.block_count() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "permutation over {} blocks, family has {}",
                    self.block_count(),
                    fam.block_count()
                ),
            });
        }
        for i in 1..=self.block_count() {
            let j = self.map(i);
            let (ri, rj) = (fam.rank(i)?, fam.rank(j)?);
            if ri != rj {
                return Err(Error::RankMismatch { from: i, to: j, from_rank: ri, to_rank: rj });
            }
        }
        Ok(())
    }
}

/// Membership in the block diagonal isotropy subgroup `G`: holds iff the
/// off block diagonal part of `u` vanishes within `tol` in operator norm.
#[allow(non_snake_case)]
pub fn in_isotropy_G(fam: &ProjectionFamily, u: &Unitary, tol: f64) -> Result<bool> {
    let off = fam.off_diagonal_part(u.matrix())?;
    Ok(op_norm(&off) <= tol)
}

/// Membership in the full isotropy group `H`: conjugation by `u` must send
/// each block projection onto a block projection of equal rank.  Returns
/// the induced permutation `sigma` with `u p_i u* = p_{sigma(i)}`.
#[allow(non_snake_case)]
pub fn in_isotropy_H(
    fam: &ProjectionFamily,
    u: &Unitary,
    tol: f64,
) -> Result<Option<BlockPermutation>> {
    if u.dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("unitary dimension {} vs family dimension {}", u.dim(), fam.dim()),
        });
    }
    let w = fam.block_count();
    let mut images = vec![0usize; w + 1];
    let mut taken = vec![false; w + 1];
    for i in 1..=w {
        let moved = u.conjugate(&fam.projection(i)?);
        let ri = fam.rank(i)?;
        let mut found = None;
        for j in 1..=w {
            if taken[j] || fam.rank(j)? != ri {
                continue;
            }
            if op_norm(&(&moved - fam.projection(j)?)) <= tol {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => {
                images[i] = j;
                taken[j] = true;
            }
            None => return Ok(None),
        }
    }
    Ok(Some(BlockPermutation::new(images)?))
}

/// Which block carries the inhomogeneous term of the tangent projection.
#[derive(Debug, Clone)]
pub enum TangentVariant {
    /// Pair terms run against the complement block; usable whenever all
    /// block projections are finite rank (always, here).
    DistinguishedP0,
    /// A distinguished block `i0 >= 1` with a unit vector `xi` in its range;
    /// the complement pair is probed through rank-one inputs instead.
    DistinguishedBlock { block: usize, vector: CVector },
}

impl TangentVariant {
    /// The default choice: the complement variant when the complement is
    /// nonzero, otherwise block 1 with its first frame column.
    pub fn default_for(fam: &ProjectionFamily) -> Result<TangentVariant> {
        if fam.p0_rank() > 0 {
            Ok(TangentVariant::DistinguishedP0)
        } else {
            let xi = fam.basis(1)?.column(0).into_owned();
            Ok(TangentVariant::DistinguishedBlock { block: 1, vector: xi })
        }
    }
}

/// A tangent vector `[L_z, Q]` of the orbit at `Q`, tagged with its
/// skew-hermitian generator.
#[derive(Debug, Clone)]
pub struct TangentVector {
    generator: SkewHermitian,
    at: OrbitPoint,
}

impl TangentVector {
    pub fn new(generator: SkewHermitian, at: OrbitPoint) -> Result<Self> {
        if generator.dim() != at.dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "generator dimension {} vs orbit dimension {}",
                    generator.dim(),
                    at.dim()
                ),
            });
        }
        Ok(Self { generator, at })
    }

    pub fn generator(&self) -> &SkewHermitian {
        &self.generator
    }

    pub fn at(&self) -> &OrbitPoint {
        &self.at
    }

    /// `[L_z, Q] = L_z Q - Q L_z` as an expression tree.
    pub fn to_super(&self) -> SuperOperator {
        let left = SuperOperator::LeftMul(self.generator.matrix().clone());
        let q = self.at.to_super();
        SuperOperator::difference(
            SuperOperator::compose(left.clone(), q.clone()),
            SuperOperator::compose(q, left),
        )
    }

    pub fn apply(&self, y: &CMatrix) -> Result<CMatrix> {
        self.to_super().apply(y)
    }
}

/// Projects a superoperator onto the tangent space of the orbit at the base
/// point: `E(X) = [L_{zhat(X)}, P]`.
///
/// The generator is assembled from one probe `p_j X(p_i)` per unordered
/// block pair; the pair containing the distinguished block against the
/// complement is probed through rank-one inputs `eta xi*` instead.  `E` is
/// idempotent and recovers `z - sum_i p_i z p_i` on commutator inputs.
pub fn tangent_project(
    fam: &ProjectionFamily,
    x: &SuperOperator,
    variant: &TangentVariant,
) -> Result<TangentVector> {
    let n = fam.dim();
    if x.dim() != n {
        return Err(Error::DimensionMismatch {
            context: format!("superoperator dimension {} vs family dimension {n}", x.dim()),
        });
    }
    let w = fam.block_count();
    let mut b = CMatrix::zeros(n, n);
    match variant {
        TangentVariant::DistinguishedP0 => {
            // One term per pair {j < i} with i >= 1; pairs against the
            // complement enter through j = 0.
            for i in 1..=w {
                let image = x.apply(&fam.projection(i)?)?;
                for j in 0..i {
                    if fam.rank(j)? == 0 {
                        continue;
                    }
                    b += fam.projection(j)? * &image;
                }
            }
        }
        TangentVariant::DistinguishedBlock { block, vector } => {
            let i0 = *block;
            if i0 == 0 || i0 > w {
                return Err(Error::BadVariant {
                    context: format!("distinguished block {i0} out of range 1..={w}"),
                });
            }
            if (vector.norm() - 1.0).abs() > tol::TOL_PRINCIPAL_ANGLE {
                return Err(Error::BadVariant {
                    context: "distinguished vector must be a unit vector".into(),
                });
            }
            let p_i0 = fam.projection(i0)?;
            if (&p_i0 * vector - vector).norm() > tol::TOL_PRINCIPAL_ANGLE {
                return Err(Error::BadVariant {
                    context: format!("distinguished vector is not in the range of block {i0}"),
                });
            }
            let xi = vector.unscale(vector.norm());
            // Cover every unordered pair except {0, i0} by a probe
            // p_j X(p_i) with the representative i != i0.
            for i in 1..=w {
                if i == i0 {
                    continue;
                }
                let image = x.apply(&fam.projection(i)?)?;
                for j in 0..i {
                    if fam.rank(j)? == 0 {
                        continue;
                    }
                    b += fam.projection(j)? * &image;
                }
                if i0 > i {
                    b += &p_i0 * &image;
                }
            }
            // The pair {0, i0} is probed by rank-one inputs through xi.
            let complement = fam.basis(0)?.clone();
            for k in 0..complement.ncols() {
                let eta = complement.column(k).into_owned();
                let image = x.apply(&outer(&eta, &xi))?;
                b -= image * outer(&xi, &eta);
            }
        }
    }
    let generator = SkewHermitian::new(&b - b.adjoint())?;
    TangentVector::new(generator, OrbitPoint::base_point(fam))
}

/// The conjugated projection `F_i(Q) = u p_i u*` read off an orbit point;
/// `i = 0` yields the moved complement.
pub fn f_map(fam: &ProjectionFamily, i: usize, q: &OrbitPoint) -> Result<CMatrix> {
    if q.base_family().dim() != fam.dim() || q.base_family().block_count() != fam.block_count() {
        return Err(Error::DimensionMismatch {
            context: "orbit point does not sit over the given family".into(),
        });
    }
    q.conjugated_family().projection(i)
}

/// Local cross section of the orbit: the polar unitary of
/// `s(Q) = sum_{i>=0} q_i p_i`.  Well defined near the base point; fails
/// with a singular factor when `Q` is too far from `P`.
pub fn cross_section(fam: &ProjectionFamily, q: &OrbitPoint) -> Result<Unitary> {
    let s = section_factor(fam, q)?;
    let (sigma, _) = polar(&s)?;
    Ok(sigma)
}

/// The raw section factor `s(Q) = sum_{i>=0} q_i p_i` before polarisation.
pub fn section_factor(fam: &ProjectionFamily, q: &OrbitPoint) -> Result<CMatrix> {
    if q.base_family().dim() != fam.dim() || q.base_family().block_count() != fam.block_count() {
        return Err(Error::DimensionMismatch {
            context: "orbit point does not sit over the given family".into(),
        });
    }
    let n = fam.dim();
    let mut s = CMatrix::zeros(n, n);
    for i in 0..=fam.block_count() {
        if fam.rank(i)? == 0 {
            continue;
        }
        s += f_map(fam, i, q)? * fam.projection(i)?;
    }
    Ok(s)
}

/// The permutation operator `r_sigma` mapping the chosen basis of block `i`
/// onto the basis of block `sigma(i)` vector by vector.  `bases[i]` must be
/// an ordered orthonormal basis of block `i` (index 0: the complement);
/// when absent the family's own frames are used.
pub fn permutation_operator(
    fam: &ProjectionFamily,
    sigma: &BlockPermutation,
    bases: Option<&[CMatrix]>,
) -> Result<Unitary> {
    sigma.check_ranks(fam)?;
    let owned: Vec<CMatrix>;
    let bases: &[CMatrix] = match bases {
        Some(b) => {
            if b.len() != fam.block_count() + 1 {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "expected {} bases (complement included), got {}",
                        fam.block_count() + 1,
                        b.len()
                    ),
                });
            }
            for (i, basis) in b.iter().enumerate() {
                if basis.ncols() != fam.rank(i)? || basis.nrows() != fam.dim() {
                    return Err(Error::DimensionMismatch {
                        context: format!("basis {i} has the wrong shape for its block"),
                    });
                }
                let gram = max_abs(
                    &(basis.adjoint() * basis - CMatrix::identity(basis.ncols(), basis.ncols())),
                );
                if gram > tol::TOL_CONSTRUCT {
                    return Err(Error::NotOrthogonal { defect: gram, tol: tol::TOL_CONSTRUCT });
                }
                let proj = fam.projection(i)?;
                if max_abs(&(&proj * basis - basis)) > tol::TOL_PRINCIPAL_ANGLE {
                    return Err(Error::BadVariant {
                        context: format!("basis {i} does not span its block"),
                    });
                }
            }
            b
        }
        None => {
            owned = (0..=fam.block_count())
                .map(|i| fam.basis(i).map(|m| m.clone()))
                .collect::<Result<_>>()?;
            &owned
        }
    };
    let n = fam.dim();
    let mut r = CMatrix::zeros(n, n);
    for i in 0..=fam.block_count() {
        r += &bases[sigma.map(i)] * bases[i].adjoint();
    }
    Unitary::new(r)
}

/// All rank-preserving block permutations fixing the complement, sorted by
/// the lexicographic order of `(sigma(1), ..., sigma(w))`.
pub fn rank_preserving_permutations(fam: &ProjectionFamily) -> Result<Vec<BlockPermutation>> {
    let w = fam.block_count();
    let ranks = fam.ranks();
    let mut out: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..=w {
        let mut grown = Vec::new();
        for prefix in &out {
            for j in 1..=w {
                if ranks[j - 1] == ranks[i - 1] && !prefix.contains(&j) {
                    let mut next = prefix.clone();
                    next.push(j);
                    grown.push(next);
                }
            }
        }
        out = grown;
        if out.len() > tol::FIBER_CAP {
            return Err(Error::FiberTooLarge { size: out.len(), cap: tol::FIBER_CAP });
        }
    }
    out.sort();
    out.into_iter().map(BlockPermutation::new).collect()
}

/// The covering fiber over `Q`: the points `sigma . Q = L_{u r_sigma} P
/// L_{(u r_sigma)*}` for every rank-preserving `sigma`.  Requires a witness
/// on `Q`; enumeration is capped at [`tol::FIBER_CAP`].
pub fn fiber(
    fam: &ProjectionFamily,
    q: &OrbitPoint,
    bases: Option<&[CMatrix]>,
) -> Result<Vec<OrbitPoint>> {
    let u = q.witness().ok_or_else(|| Error::MissingWitness {
        context: "fiber enumeration needs the conjugating unitary".into(),
    })?;
    let sigmas = rank_preserving_permutations(fam)?;
    let mut points = Vec::with_capacity(sigmas.len());
    for sigma in &sigmas {
        let r = permutation_operator(fam, sigma, bases)?;
        points.push(conjugate(&u.compose(&r), &OrbitPoint::base_point(fam))?);
    }
    Ok(points)
}
