//! Pinching superoperators over families of mutually orthogonal projections.
//!
//! A family is stored through frames: each block `i = 1..=w` is an `n x r_i`
//! matrix with orthonormal columns, the blocks being mutually orthogonal.
//! Block `0` is the derived complement of the family; it is never a stored
//! projection, only its basis is materialised.  The pinching of the family is
//! `P(x) = sum_{i>=1} p_i x p_i` (the complement block does not contribute).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    complement_basis, ensure_finite, expm_skew, max_abs, op_norm, outer, random_skew_unit,
    CMatrix, CVector, Complex64, Unitary,
};
use crate::norms::SymmetricNorm;
use crate::orbit::BlockPermutation;
use crate::tol;

/// A finite family of mutually orthogonal projections in C^n, given by
/// orthonormal frames, with its complement block derived at construction.
#[derive(Debug, Clone)]
pub struct ProjectionFamily {
    dim: usize,
    frames: Vec<CMatrix>,
    complement: CMatrix,
}

impl ProjectionFamily {
    /// Validates frames: consistent ambient dimension, at least one block,
    /// every block of rank >= 1, combined columns orthonormal.
    pub fn new(frames: Vec<CMatrix>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::DimensionTooSmall {
                context: "a projection family needs at least one block".into(),
            });
        }
        let dim = frames[0].nrows();
        let mut total = 0;
        for (idx, f) in frames.iter().enumerate() {
            ensure_finite(f)?;
            if f.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "frame {} has {} rows, expected ambient dimension {dim}",
                        idx + 1,
                        f.nrows()
                    ),
                });
            }
            if f.ncols() == 0 {
                return Err(Error::EmptyBlock { index: idx + 1 });
            }
            total += f.ncols();
        }
        if total > dim {
            return Err(Error::OverComplete { total, dim });
        }
        let mut stacked = CMatrix::zeros(dim, total);
        let mut col = 0;
        for f in &frames {
            stacked.view_mut((0, col), (dim, f.ncols())).copy_from(f);
            col += f.ncols();
        }
        let defect = max_abs(&(stacked.adjoint() * &stacked - CMatrix::identity(total, total)));
        if defect > tol::TOL_CONSTRUCT {
            return Err(Error::NotOrthogonal { defect, tol: tol::TOL_CONSTRUCT });
        }
        let complement = complement_basis(&stacked);
        Ok(Self { dim, frames, complement })
    }

    /// Family whose frames are consecutive slices of the canonical basis.
    pub fn canonical(dim: usize, ranks: &[usize]) -> Result<Self> {
        let mut frames = Vec::with_capacity(ranks.len());
        let mut offset = 0;
        let id = CMatrix::identity(dim, dim);
        for &r in ranks {
            if offset + r > dim {
                return Err(Error::OverComplete { total: offset + r, dim });
            }
            frames.push(id.view((0, offset), (dim, r)).into_owned());
            offset += r;
        }
        Self::new(frames)
    }

    /// Seeded random family: `blocks` blocks of total rank `dim - p0_rank`
    /// (each of rank >= 1), in generic position.
    pub fn random(dim: usize, blocks: usize, p0_rank: usize, rng: &mut impl Rng) -> Result<Self> {
        if blocks == 0 || blocks + p0_rank > dim {
            return Err(Error::DimensionTooSmall {
                context: format!("cannot fit {blocks} blocks plus complement rank {p0_rank} in dimension {dim}"),
            });
        }
        let mut ranks = vec![1usize; blocks];
        for _ in 0..(dim - p0_rank - blocks) {
            ranks[rng.gen_range(0..blocks)] += 1;
        }
        let rotation = expm_skew(&random_skew_unit(dim, rng).scaled(1.2));
        let mut frames = Vec::with_capacity(blocks);
        let mut offset = 0;
        for &r in &ranks {
            frames.push(rotation.matrix().view((0, offset), (dim, r)).into_owned());
            offset += r;
        }
        Self::new(frames)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored blocks `w` (the complement is not counted).
    pub fn block_count(&self) -> usize {
        self.frames.len()
    }

    pub fn p0_rank(&self) -> usize {
        self.complement.ncols()
    }

    /// Ranks of blocks `1..=w`.
    pub fn ranks(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.ncols()).collect()
    }

    /// Rank of block `i` with the convention that block 0 is the complement.
    pub fn rank(&self, i: usize) -> Result<usize> {
        Ok(self.basis(i)?.ncols())
    }

    /// Orthonormal basis of block `i`; block 0 is the complement.
    pub fn basis(&self, i: usize) -> Result<&CMatrix> {
        if i == 0 {
            Ok(&self.complement)
        } else if i <= self.frames.len() {
            Ok(&self.frames[i - 1])
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                context: format!("family has blocks 0..={}", self.frames.len()),
            })
        }
    }

    /// The projection `p_i` as a dense matrix; block 0 is the complement.
    pub fn projection(&self, i: usize) -> Result<CMatrix> {
        let b = self.basis(i)?;
        Ok(b * b.adjoint())
    }

    /// `P(x) = sum_{i>=1} p_i x p_i`, evaluated through the frames.
    pub fn pinch(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_operand(x)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for f in &self.frames {
            out += f * (f.adjoint() * x * f) * f.adjoint();
        }
        Ok(out)
    }

    /// Block diagonal part `sum_{i>=0} p_i x p_i` including the complement.
    pub fn block_diagonal_part(&self, x: &CMatrix) -> Result<CMatrix> {
        let mut out = self.pinch(x)?;
        if self.p0_rank() > 0 {
            let c = &self.complement;
            out += c * (c.adjoint() * x * c) * c.adjoint();
        }
        Ok(out)
    }

    /// `x` minus its block diagonal part (complement included).
    pub fn off_diagonal_part(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(x - self.block_diagonal_part(x)?)
    }

    fn check_operand(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "operand is {}x{}, family lives in dimension {}",
                    x.nrows(),
                    x.ncols(),
                    self.dim
                ),
            });
        }
        Ok(())
    }
}

/// Superoperators as expression trees over structural primitives.
#[derive(Debug, Clone)]
pub enum SuperOperator {
    Identity { dim: usize },
    /// `y -> a y`.
    LeftMul(CMatrix),
    /// `y -> y a`.
    RightMul(CMatrix),
    Pinch(ProjectionFamily),
    /// `(f . g)(y) = f(g(y))`.
    Compose(Box<SuperOperator>, Box<SuperOperator>),
    Sum(Box<SuperOperator>, Box<SuperOperator>),
    Difference(Box<SuperOperator>, Box<SuperOperator>),
    Scale(Complex64, Box<SuperOperator>),
}

impl SuperOperator {
    pub fn compose(f: SuperOperator, g: SuperOperator) -> SuperOperator {
        SuperOperator::Compose(Box::new(f), Box::new(g))
    }

    pub fn sum(f: SuperOperator, g: SuperOperator) -> SuperOperator {
        SuperOperator::Sum(Box::new(f), Box::new(g))
    }

    pub fn difference(f: SuperOperator, g: SuperOperator) -> SuperOperator {
        SuperOperator::Difference(Box::new(f), Box::new(g))
    }

    pub fn scale(c: Complex64, f: SuperOperator) -> SuperOperator {
        SuperOperator::Scale(c, Box::new(f))
    }

    /// Ambient dimension, read off the leftmost leaf.
    pub fn dim(&self) -> usize {
        match self {
            SuperOperator::Identity { dim } => *dim,
            SuperOperator::LeftMul(a) | SuperOperator::RightMul(a) => a.nrows(),
            SuperOperator::Pinch(fam) => fam.dim(),
            SuperOperator::Compose(f, _)
            | SuperOperator::Sum(f, _)
            | SuperOperator::Difference(f, _)
            | SuperOperator::Scale(_, f) => f.dim(),
        }
    }

    /// Applies the expression to a matrix.
    pub fn apply(&self, y: &CMatrix) -> Result<CMatrix> {
        let n = y.nrows();
        if y.ncols() != n {
            return Err(Error::NotSquare { rows: y.nrows(), cols: y.ncols() });
        }
        match self {
            SuperOperator::Identity { dim } => {
                if *dim != n {
                    return Err(Error::DimensionMismatch {
                        context: format!("identity of dimension {dim} applied to {n}x{n}"),
                    });
                }
                Ok(y.clone())
            }
            SuperOperator::LeftMul(a) => {
                Self::check_factor(a, n)?;
                Ok(a * y)
            }
            SuperOperator::RightMul(a) => {
                Self::check_factor(a, n)?;
                Ok(y * a)
            }
            SuperOperator::Pinch(fam) => fam.pinch(y),
            SuperOperator::Compose(f, g) => f.apply(&g.apply(y)?),
            SuperOperator::Sum(f, g) => Ok(f.apply(y)? + g.apply(y)?),
            SuperOperator::Difference(f, g) => Ok(f.apply(y)? - g.apply(y)?),
            SuperOperator::Scale(c, f) => Ok(f.apply(y)?.map(|e| c * e)),
        }
    }

    fn check_factor(a: &CMatrix, n: usize) -> Result<()> {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!("factor is {}x{}, operand is {n}x{n}", a.nrows(), a.ncols()),
            });
        }
        Ok(())
    }

    /// Adjoint with respect to the Frobenius pairing `<x, y> = tr(y* x)`.
    pub fn adjoint(&self) -> SuperOperator {
        match self {
            SuperOperator::Identity { dim } => SuperOperator::Identity { dim: *dim },
            SuperOperator::LeftMul(a) => SuperOperator::LeftMul(a.adjoint()),
            SuperOperator::RightMul(a) => SuperOperator::RightMul(a.adjoint()),
            SuperOperator::Pinch(fam) => SuperOperator::Pinch(fam.clone()),
            SuperOperator::Compose(f, g) => SuperOperator::compose(g.adjoint(), f.adjoint()),
            SuperOperator::Sum(f, g) => SuperOperator::sum(f.adjoint(), g.adjoint()),
            SuperOperator::Difference(f, g) => {
                SuperOperator::difference(f.adjoint(), g.adjoint())
            }
            SuperOperator::Scale(c, f) => SuperOperator::scale(c.conj(), f.adjoint()),
        }
    }

    /// Dense n^2 x n^2 matrix of the expression acting on column-vectorised
    /// matrices.  Dimension is capped by [`tol::MAX_MATRICIZE_DIM`].
    pub fn matricize(&self) -> Result<CMatrix> {
        let n = self.dim();
        if n > tol::MAX_MATRICIZE_DIM {
            return Err(Error::DimensionTooLarge { dim: n, max: tol::MAX_MATRICIZE_DIM });
        }
        self.matricize_unchecked(n)
    }

    fn matricize_unchecked(&self, n: usize) -> Result<CMatrix> {
        let id = CMatrix::identity(n, n);
        match self {
            SuperOperator::Identity { dim } => {
                if *dim != n {
                    return Err(Error::DimensionMismatch {
                        context: format!("identity of dimension {dim} in an expression over {n}"),
                    });
                }
                Ok(CMatrix::identity(n * n, n * n))
            }
            SuperOperator::LeftMul(a) => {
                Self::check_factor(a, n)?;
                Ok(id.kronecker(a))
            }
            SuperOperator::RightMul(a) => {
                Self::check_factor(a, n)?;
                Ok(a.transpose().kronecker(&id))
            }
            SuperOperator::Pinch(fam) => {
                if fam.dim() != n {
                    return Err(Error::DimensionMismatch {
                        context: format!("pinch over dimension {} in an expression over {n}", fam.dim()),
                    });
                }
                let mut out = DMatrix::zeros(n * n, n * n);
                for i in 1..=fam.block_count() {
                    let p = fam.projection(i)?;
                    out += p.transpose().kronecker(&p);
                }
                Ok(out)
            }
            SuperOperator::Compose(f, g) => Ok(f.matricize_unchecked(n)? * g.matricize_unchecked(n)?),
            SuperOperator::Sum(f, g) => Ok(f.matricize_unchecked(n)? + g.matricize_unchecked(n)?),
            SuperOperator::Difference(f, g) => {
                Ok(f.matricize_unchecked(n)? - g.matricize_unchecked(n)?)
            }
            SuperOperator::Scale(c, f) => Ok(f.matricize_unchecked(n)?.map(|e| c * e)),
        }
    }

    /// Families of every pinch node in the expression, in traversal order.
    fn pinch_families(&self) -> Vec<&ProjectionFamily> {
        match self {
            SuperOperator::Identity { .. }
            | SuperOperator::LeftMul(_)
            | SuperOperator::RightMul(_) => Vec::new(),
            SuperOperator::Pinch(fam) => vec![fam],
            SuperOperator::Compose(f, g)
            | SuperOperator::Sum(f, g)
            | SuperOperator::Difference(f, g) => {
                let mut v = f.pinch_families();
                v.extend(g.pinch_families());
                v
            }
            SuperOperator::Scale(_, f) => f.pinch_families(),
        }
    }
}

/// The commutator superoperator `[L_a, P] = L_a P - P L_a` of a left
/// multiplication with the pinching of `fam`.
pub fn commutator_super(a: &CMatrix, fam: &ProjectionFamily) -> SuperOperator {
    let left = SuperOperator::LeftMul(a.clone());
    let pinch = SuperOperator::Pinch(fam.clone());
    SuperOperator::difference(
        SuperOperator::compose(left.clone(), pinch.clone()),
        SuperOperator::compose(pinch, left),
    )
}

/// Exact norm of the expression as an operator on the Schatten-2 space:
/// the largest singular value of its matricization.
pub fn super_norm_s2(s: &SuperOperator) -> Result<f64> {
    Ok(op_norm(&s.matricize()?))
}

/// A point `u . P = L_u P L_{u*}` on the unitary orbit of a pinching.
///
/// The point is the superoperator `y -> sum_i q_i y p_i` where
/// `q_i = u p_i u*`; it is stored as the base family together with the
/// conjugated frames, plus the witness `u` when one is known.
#[derive(Debug, Clone)]
pub struct OrbitPoint {
    base: ProjectionFamily,
    conjugated: ProjectionFamily,
    witness: Option<Unitary>,
}

impl OrbitPoint {
    /// The base point `P` itself (witness: identity).
    pub fn base_point(fam: &ProjectionFamily) -> Self {
        Self {
            base: fam.clone(),
            conjugated: fam.clone(),
            witness: Some(Unitary::identity(fam.dim())),
        }
    }

    /// Point assembled from an explicitly given conjugated family; no
    /// witness is recorded.  Blocks must match in number and rank.
    pub fn from_families(base: ProjectionFamily, conjugated: ProjectionFamily) -> Result<Self> {
        if base.dim() != conjugated.dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "base dimension {} vs conjugated dimension {}",
                    base.dim(),
                    conjugated.dim()
                ),
            });
        }
        if base.block_count() != conjugated.block_count() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "base has {} blocks, conjugated has {}",
                    base.block_count(),
                    conjugated.block_count()
                ),
            });
        }
        for i in 1..=base.block_count() {
            let (ra, rb) = (base.rank(i)?, conjugated.rank(i)?);
            if ra != rb {
                return Err(Error::RankMismatch { from: i, to: i, from_rank: ra, to_rank: rb });
            }
        }
        Ok(Self { base, conjugated, witness: None })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base_family(&self) -> &ProjectionFamily {
        &self.base
    }

    pub fn conjugated_family(&self) -> &ProjectionFamily {
        &self.conjugated
    }

    pub fn witness(&self) -> Option<&Unitary> {
        self.witness.as_ref()
    }

    /// `sum_i q_i y p_i` through the frames.
    pub fn apply(&self, y: &CMatrix) -> Result<CMatrix> {
        self.base.check_operand(y)?;
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for i in 1..=self.base.block_count() {
            let f = self.base.basis(i)?;
            let g = self.conjugated.basis(i)?;
            out += g * (g.adjoint() * y * f) * f.adjoint();
        }
        Ok(out)
    }

    /// Expression-tree form.  With a witness this is
    /// `L_u Pinch L_{u*}`, keeping the base pinch node visible to norm
    /// estimation; without one it is `sum_i L_{q_i} R_{p_i}`.
    pub fn to_super(&self) -> SuperOperator {
        if let Some(u) = &self.witness {
            let left = SuperOperator::LeftMul(u.matrix().clone());
            let right = SuperOperator::LeftMul(u.adjoint().into_matrix());
            return SuperOperator::compose(
                left,
                SuperOperator::compose(SuperOperator::Pinch(self.base.clone()), right),
            );
        }
        let mut acc: Option<SuperOperator> = None;
        for i in 1..=self.base.block_count() {
            let term = SuperOperator::compose(
                SuperOperator::LeftMul(
                    self.conjugated.projection(i).expect("block index in range"),
                ),
                SuperOperator::RightMul(self.base.projection(i).expect("block index in range")),
            );
            acc = Some(match acc {
                None => term,
                Some(s) => SuperOperator::sum(s, term),
            });
        }
        acc.expect("families are nonempty")
    }

    /// Difference `self - other` as an expression tree, for norm evaluation.
    pub fn difference_super(&self, other: &OrbitPoint) -> SuperOperator {
        SuperOperator::difference(self.to_super(), other.to_super())
    }
}

/// Left action of the unitary group: `u . point`, composing witnesses.
pub fn conjugate(u: &Unitary, point: &OrbitPoint) -> Result<OrbitPoint> {
    if u.dim() != point.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("unitary dimension {} vs orbit dimension {}", u.dim(), point.dim()),
        });
    }
    let frames = (1..=point.base.block_count())
        .map(|i| u.matrix() * point.conjugated.basis(i).expect("index in range"))
        .collect::<Vec<_>>();
    let conjugated = ProjectionFamily::new(frames)?;
    Ok(OrbitPoint {
        base: point.base.clone(),
        conjugated,
        witness: point.witness.as_ref().map(|w| u.compose(w)),
    })
}

/// A certified lower bound for an induced superoperator norm.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    /// The certified value `ideal_norm(norm, S(witness))`.
    pub lower: f64,
    /// The certifying input, normalised to `ideal_norm(norm, witness) = 1`.
    pub witness: CMatrix,
}

/// Certified lower bound for `sup ||S(y)||_phi / ||y||_phi`.
///
/// Candidates combine: rank-one `xi eta*` pairs drawn from the block frames
/// (complement included) of every pinch node, per-block-pair rank-one
/// refinements through singular vectors of the restricted action, prefix
/// sums of block projections, the identity, the top singular vector of the
/// dense matricization, and `budget` seeded random starts driven by power
/// iteration on `S* S`.  Every candidate is re-evaluated exactly, so the
/// result is always a true lower bound with its witness.
pub fn super_norm_estimate(
    s: &SuperOperator,
    norm: &SymmetricNorm,
    budget: usize,
    seed: u64,
) -> Result<NormEstimate> {
    use rand::SeedableRng;
    let n = s.dim();
    let mut candidates: Vec<CMatrix> = Vec::new();

    let families = s.pinch_families();
    for fam in &families {
        let blocks: Vec<usize> = (0..=fam.block_count())
            .filter(|&i| fam.rank(i).map(|r| r > 0).unwrap_or(false))
            .collect();
        // Rank-one pairs of frame columns across all ordered block pairs.
        for &i in &blocks {
            let bi = fam.basis(i)?.clone();
            for &j in &blocks {
                let bj = fam.basis(j)?.clone();
                for ci in 0..bi.ncols() {
                    for cj in 0..bj.ncols() {
                        candidates.push(outer(
                            &bj.column(cj).into_owned(),
                            &bi.column(ci).into_owned(),
                        ));
                    }
                }
            }
        }
        // Per-pair refinement: for eta fixed in the target block, the map
        // xi -> S(xi eta*) is linear on the source block; its top right
        // singular vector maximises the Frobenius output norm and recovers
        // block-restriction extremisers exactly.
        for &i in &blocks {
            let bi = fam.basis(i)?.clone();
            for &j in &blocks {
                if i == j {
                    continue;
                }
                let bj = fam.basis(j)?.clone();
                for ci in 0..bi.ncols() {
                    let eta = bi.column(ci).into_owned();
                    let mut stacked = CMatrix::zeros(n * n, bj.ncols());
                    for cj in 0..bj.ncols() {
                        let image = s.apply(&outer(&bj.column(cj).into_owned(), &eta))?;
                        stacked.set_column(cj, &CVector::from_iterator(n * n, image.iter().copied()));
                    }
                    let svd = stacked.svd(false, true);
                    let v_t = svd.v_t.expect("v_t requested");
                    let weights = v_t.row(0).adjoint();
                    let xi = &bj * weights;
                    let norm_xi = xi.norm();
                    if norm_xi > 1e-14 {
                        candidates.push(outer(&xi.unscale(norm_xi), &eta));
                    }
                }
            }
        }
        // Prefix sums of block projections (finite-rank sub-projections).
        let mut prefix = CMatrix::zeros(n, n);
        for i in 1..=fam.block_count() {
            prefix += fam.projection(i)?;
            candidates.push(prefix.clone());
        }
    }
    if families.is_empty() {
        let id = CMatrix::identity(n, n);
        for k in 0..n {
            for l in 0..n {
                candidates.push(outer(&id.column(k).into_owned(), &id.column(l).into_owned()));
            }
        }
    }
    candidates.push(CMatrix::identity(n, n));

    // Top singular vector of the dense matricization: exact for the
    // Schatten-2 norm and a strong seed for the others.
    let mat = s.matricize()?;
    {
        let svd = mat.clone().svd(false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let top = v_t.row(0).adjoint();
        candidates.push(CMatrix::from_iterator(n, n, top.iter().copied()));
    }

    // Seeded random starts with power-iteration ascent on S* S.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let adjoint = s.adjoint();
    for _ in 0..budget {
        let mut y = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            )
        });
        for _ in 0..8 {
            let image = adjoint.apply(&s.apply(&y)?)?;
            let scale = image.norm();
            if scale < 1e-14 {
                break;
            }
            y = image.unscale(scale);
            candidates.push(y.clone());
        }
    }

    let mut best_value = 0.0;
    let mut best_witness: Option<CMatrix> = None;
    for y in &candidates {
        let denom = norm.ideal_norm(y);
        if denom < 1e-14 {
            continue;
        }
        let value = norm.ideal_norm(&s.apply(y)?) / denom;
        if value > best_value {
            best_value = value;
            best_witness = Some(y.unscale(denom));
        }
    }
    let witness = best_witness.unwrap_or_else(|| CMatrix::identity(n, n));
    let lower = norm.ideal_norm(&s.apply(&witness)?);
    Ok(NormEstimate { lower, witness })
}

/// Decides whether two families induce the same pinching, returning the
/// block relabeling `sigma` with `p_i = q_{sigma(i)}` when they do.
///
/// Blocks are matched by principal angles, measured through the operator
/// norm of the projector difference (`sin` of the largest angle); the match
/// is then verified on the full matrix-unit basis.
pub fn pinching_equal(
    a: &ProjectionFamily,
    b: &ProjectionFamily,
    tol: f64,
) -> Result<Option<BlockPermutation>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("ambient dimensions {} vs {}", a.dim(), b.dim()),
        });
    }
    let w = a.block_count();
    if b.block_count() != w || a.p0_rank() != b.p0_rank() {
        return Ok(None);
    }
    let mut images = vec![0usize; w + 1];
    let mut taken = vec![false; w + 1];
    for i in 1..=w {
        let pi = a.projection(i)?;
        let ri = a.rank(i)?;
        let mut found = None;
        for j in 1..=w {
            if taken[j] || b.rank(j)? != ri {
                continue;
            }
            if op_norm(&(&pi - b.projection(j)?)) <= tol {
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
    // Verify the induced pinchings agree on the matrix-unit basis.
    let n = a.dim();
    let id = CMatrix::identity(n, n);
    for k in 0..n {
        for l in 0..n {
            let unit = outer(&id.column(k).into_owned(), &id.column(l).into_owned());
            if max_abs(&(a.pinch(&unit)? - b.pinch(&unit)?)) > tol * 10.0 {
                return Ok(None);
            }
        }
    }
    Ok(Some(BlockPermutation::new(images)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unitary_near_identity, s2_norm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        use rand::Rng;
        CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn family_construction_validates() {
        let id = CMatrix::identity(3, 3);
        let f1 = id.view((0, 0), (3, 1)).into_owned();
        let f2 = id.view((0, 1), (3, 2)).into_owned();
        assert!(ProjectionFamily::new(vec![f1.clone(), f2.clone()]).is_ok());
        // Repeating a frame breaks mutual orthogonality.
        assert!(matches!(
            ProjectionFamily::new(vec![f1.clone(), f1.clone()]),
            Err(Error::NotOrthogonal { .. })
        ));
        // Two copies of a 2-column frame exceed the ambient dimension.
        assert!(matches!(
            ProjectionFamily::new(vec![f2.clone(), f2.clone()]),
            Err(Error::OverComplete { .. })
        ));
        assert!(matches!(
            ProjectionFamily::new(vec![CMatrix::zeros(3, 0)]),
            Err(Error::EmptyBlock { .. })
        ));
        assert!(ProjectionFamily::new(Vec::new()).is_err());
    }

    #[test]
    fn canonical_family_reports_shapes() {
        let fam = ProjectionFamily::canonical(5, &[2, 1]).unwrap();
        assert_eq!(fam.dim(), 5);
        assert_eq!(fam.block_count(), 2);
        assert_eq!(fam.p0_rank(), 2);
        assert_eq!(fam.ranks(), vec![2, 1]);
        assert_eq!(fam.rank(0).unwrap(), 2);
        assert!(fam.rank(3).is_err());
    }

    #[test]
    fn pinch_is_idempotent_adjoint_compatible_and_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..5u64 {
            let fam = ProjectionFamily::random(6, 3, seed as usize % 2, &mut rng).unwrap();
            let x = random_matrix(6, &mut rng);
            let once = fam.pinch(&x).unwrap();
            let twice = fam.pinch(&once).unwrap();
            assert!(max_abs(&(&twice - &once)) < 1e-12);
            let adj = fam.pinch(&x.adjoint()).unwrap();
            assert!(max_abs(&(once.adjoint() - adj)) < 1e-12);
            for norm in SymmetricNorm::builtins() {
                assert!(
                    norm.ideal_norm(&once) <= norm.ideal_norm(&x) + 1e-10,
                    "{norm}: pinching must be a contraction"
                );
            }
        }
    }

    #[test]
    fn commutator_super_matches_closed_form_on_two_by_two() {
        // For fam = {e1} and z = [[0, 1], [-1, 0]], the commutator sends y
        // to [[0, -1], [-1, 0]] y p_1.
        let fam = ProjectionFamily::canonical(2, &[1]).unwrap();
        let z = CMatrix::from_fn(2, 2, |r, c| {
            Complex64::new([[0.0, 1.0], [-1.0, 0.0]][r][c], 0.0)
        });
        let s = commutator_super(&z, &fam);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_matrix(2, &mut rng);
        let factor = CMatrix::from_fn(2, 2, |r, c| {
            Complex64::new([[0.0, -1.0], [-1.0, 0.0]][r][c], 0.0)
        });
        let expected = factor * &y * fam.projection(1).unwrap();
        assert!(max_abs(&(s.apply(&y).unwrap() - expected)) < 1e-13);
        assert!((super_norm_s2(&s).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matricize_agrees_with_apply_on_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fam = ProjectionFamily::random(4, 2, 1, &mut rng).unwrap();
        let a = random_matrix(4, &mut rng);
        let b = random_matrix(4, &mut rng);
        let s = SuperOperator::sum(
            SuperOperator::compose(
                SuperOperator::LeftMul(a),
                SuperOperator::Pinch(fam.clone()),
            ),
            SuperOperator::scale(
                Complex64::new(0.0, 0.5),
                SuperOperator::RightMul(b),
            ),
        );
        let mat = s.matricize().unwrap();
        let n = 4;
        let id = CMatrix::identity(n, n);
        for k in 0..n {
            for l in 0..n {
                let unit = outer(&id.column(k).into_owned(), &id.column(l).into_owned());
                let image = s.apply(&unit).unwrap();
                let col = mat.column(l * n + k);
                for (idx, entry) in image.iter().enumerate() {
                    assert!((entry - col[idx]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn adjoint_satisfies_frobenius_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let fam = ProjectionFamily::random(4, 2, 0, &mut rng).unwrap();
        let a = random_matrix(4, &mut rng);
        let s = SuperOperator::compose(
            SuperOperator::LeftMul(a),
            SuperOperator::Pinch(fam),
        );
        let x = random_matrix(4, &mut rng);
        let y = random_matrix(4, &mut rng);
        let lhs = (y.adjoint() * s.apply(&x).unwrap()).trace();
        let rhs = (s.adjoint().apply(&y).unwrap().adjoint() * x).trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn pinch_super_norm_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (dim, blocks, p0) in [(3, 1, 1), (4, 2, 0), (6, 3, 2)] {
            let fam = ProjectionFamily::random(dim, blocks, p0, &mut rng).unwrap();
            let s = SuperOperator::Pinch(fam);
            assert!((super_norm_s2(&s).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn orbit_point_reproduces_conjugated_pinching() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fam = ProjectionFamily::random(5, 2, 1, &mut rng).unwrap();
        let u = random_unitary_near_identity(5, 0.8, 99);
        let q = conjugate(&u, &OrbitPoint::base_point(&fam)).unwrap();
        let y = random_matrix(5, &mut rng);
        // The orbit acts through left multiplication operators:
        // Q(y) = u P(u* y) = sum_i (u p_i u*) y p_i.
        let direct = u.matrix() * fam.pinch(&(u.matrix().adjoint() * &y)).unwrap();
        assert!(max_abs(&(q.apply(&y).unwrap() - &direct)) < 1e-12);
        assert!(max_abs(&(q.to_super().apply(&y).unwrap() - direct)) < 1e-12);
    }

    #[test]
    fn conjugation_composes_as_a_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let fam = ProjectionFamily::random(4, 2, 0, &mut rng).unwrap();
        let u1 = random_unitary_near_identity(4, 0.6, 1);
        let u2 = random_unitary_near_identity(4, 0.4, 2);
        let q12 = conjugate(&u2, &conjugate(&u1, &OrbitPoint::base_point(&fam)).unwrap()).unwrap();
        let q = conjugate(&u2.compose(&u1), &OrbitPoint::base_point(&fam)).unwrap();
        let y = random_matrix(4, &mut rng);
        assert!(max_abs(&(q12.apply(&y).unwrap() - q.apply(&y).unwrap())) < 1e-12);
        let w12 = q12.witness().unwrap().matrix();
        let w = q.witness().unwrap().matrix();
        assert!(max_abs(&(w12 - w)) < 1e-12);
    }

    #[test]
    fn estimate_is_tight_for_identity_and_s2() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let id = SuperOperator::Identity { dim: 3 };
        for norm in SymmetricNorm::builtins() {
            let est = super_norm_estimate(&id, &norm, 2, 5).unwrap();
            assert!((est.lower - 1.0).abs() < 1e-10, "{norm}");
            assert!((norm.ideal_norm(&est.witness) - 1.0).abs() < 1e-10);
        }
        for trial in 0..5 {
            let fam = ProjectionFamily::random(4, 2, trial % 2, &mut rng).unwrap();
            let a = random_matrix(4, &mut rng);
            let s = SuperOperator::sum(
                commutator_super(&a, &fam),
                SuperOperator::scale(Complex64::new(0.3, 0.0), SuperOperator::Identity { dim: 4 }),
            );
            let exact = super_norm_s2(&s).unwrap();
            let est =
                super_norm_estimate(&s, &SymmetricNorm::SchattenP(2.0), 4, trial as u64).unwrap();
            assert!(est.lower <= exact + 1e-9);
            assert!(est.lower >= exact - 1e-6, "estimate too loose: {} vs {exact}", est.lower);
        }
    }

    #[test]
    fn estimate_reaches_block_commutator_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let fam = ProjectionFamily::random(6, 2, 2, &mut rng).unwrap();
        let x = random_matrix(6, &mut rng);
        let s = commutator_super(&x, &fam);
        for norm in SymmetricNorm::builtins() {
            let est = super_norm_estimate(&s, &norm, 2, 77).unwrap();
            for i in 1..=fam.block_count() {
                for j in 0..=fam.block_count() {
                    if i == j {
                        continue;
                    }
                    let bound =
                        op_norm(&(fam.projection(i).unwrap() * &x * fam.projection(j).unwrap()));
                    assert!(
                        est.lower >= bound - 1e-10,
                        "{norm}: estimate {} below block bound {bound} at ({i}, {j})",
                        est.lower
                    );
                }
            }
        }
    }

    #[test]
    fn estimate_witness_is_normalised_and_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let fam = ProjectionFamily::random(5, 2, 1, &mut rng).unwrap();
        let x = random_matrix(5, &mut rng);
        let s = commutator_super(&x, &fam);
        for norm in SymmetricNorm::builtins() {
            let est = super_norm_estimate(&s, &norm, 3, 7).unwrap();
            assert!((norm.ideal_norm(&est.witness) - 1.0).abs() < 1e-10, "{norm}");
            let value = norm.ideal_norm(&s.apply(&est.witness).unwrap());
            assert!((value - est.lower).abs() < 1e-10, "{norm}");
        }
    }

    #[test]
    fn pinching_equality_detects_relabelings_and_rejects_refinements() {
        // Same subspaces listed in a different order: equal, with the
        // relabeling recorded.
        let a = ProjectionFamily::canonical(4, &[1, 2]).unwrap();
        let id = CMatrix::identity(4, 4);
        let b = ProjectionFamily::new(vec![
            id.view((0, 1), (4, 2)).into_owned(),
            id.view((0, 0), (4, 1)).into_owned(),
        ])
        .unwrap();
        let sigma = pinching_equal(&a, &b, tol::TOL_PRINCIPAL_ANGLE).unwrap().unwrap();
        assert_eq!(sigma.map(1), 2);
        assert_eq!(sigma.map(2), 1);
        assert_eq!(sigma.map(0), 0);

        // A refinement of a block is a different pinching.
        let c = ProjectionFamily::canonical(4, &[1, 1, 1]).unwrap();
        assert!(pinching_equal(&a, &c, tol::TOL_PRINCIPAL_ANGLE).unwrap().is_none());

        // Rotating a frame inside its own span leaves the pinching fixed.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let rot = random_unitary_near_identity(2, 1.0, 3);
        let rotated_frame = id.view((0, 1), (4, 2)).into_owned() * rot.matrix();
        let d = ProjectionFamily::new(vec![
            id.view((0, 0), (4, 1)).into_owned(),
            rotated_frame,
        ])
        .unwrap();
        let sigma = pinching_equal(&a, &d, tol::TOL_PRINCIPAL_ANGLE).unwrap().unwrap();
        assert_eq!(sigma.map(1), 1);
        assert_eq!(sigma.map(2), 2);
        let _ = &mut rng;

        // Different ambient dimensions are a structural error.
        let e = ProjectionFamily::canonical(3, &[1]).unwrap();
        assert!(pinching_equal(&a, &e, tol::TOL_PRINCIPAL_ANGLE).is_err());
    }

    #[test]
    fn difference_super_norm_of_small_rotation_matches_projector_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let fam = ProjectionFamily::random(4, 2, 0, &mut rng).unwrap();
        let u = random_unitary_near_identity(4, 0.05, 31);
        let p = OrbitPoint::base_point(&fam);
        let q = conjugate(&u, &p).unwrap();
        let norm = super_norm_s2(&q.difference_super(&p)).unwrap();
        // The matricization is a direct sum over blocks, so the norm equals
        // the largest projector displacement.
        let expected = (1..=fam.block_count())
            .map(|i| {
                op_norm(&(u.conjugate(&fam.projection(i).unwrap()) - fam.projection(i).unwrap()))
            })
            .fold(0.0f64, f64::max);
        assert!((norm - expected).abs() < 1e-10);
        assert!(s2_norm(&q.apply(&random_matrix(4, &mut rng)).unwrap()).is_finite());
    }
}
