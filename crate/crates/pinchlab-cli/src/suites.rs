//! The seven check suites.  Each trial derives its randomness from
//! (config seed, suite tag, trial index) alone, and trial results are
//! reduced by worst-case folds, so reports are deterministic regardless
//! of how trials are scheduled across threads.

use crate::config::{CommandKind, ExperimentConfig};
use crate::report::{CheckRecord, Report};
use pinchlab::finsler::{distance_bounds, quotient_norm, SolverConfig};
use pinchlab::linalg::{
    expm_skew, max_abs, op_norm, random_skew_unit, random_unitary_near_identity, s2_norm, CMatrix,
    Complex64, SkewHermitian,
};
use pinchlab::normal::{
    gap_inequality_check, swap_sequence_un, topology_gap_table, GapScenario, NormalOperatorSpec,
};
use pinchlab::orbit::{cross_section, f_map, fiber, section_factor, tangent_project, TangentVariant};
use pinchlab::pinching::{
    commutator_super, conjugate, super_norm_estimate, super_norm_s2, OrbitPoint, ProjectionFamily,
    SuperOperator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// A library failure on an otherwise valid configuration.
#[derive(Debug)]
pub struct EngineError(pub String);

impl std::fmt::Display for EngineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "engine error: {}", self.0)
    }
}

impl std::error::Error for EngineError {}

impl From<pinchlab::Error> for EngineError {
    fn from(e: pinchlab::Error) -> Self {
        EngineError(e.to_string())
    }
}

type SuiteResult = Result<Vec<CheckRecord>, EngineError>;

/// Runs the configured suite and assembles the report.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, EngineError> {
    let start = Instant::now();
    let checks = match cfg.command {
        CommandKind::Verify => verify(cfg)?,
        CommandKind::Fiber => fiber_suite(cfg)?,
        CommandKind::Section => section_suite(cfg)?,
        CommandKind::Distance => distance_suite(cfg)?,
        CommandKind::TopologyGap => topology_gap_suite(cfg)?,
        CommandKind::NormalOrbit => normal_orbit_suite(cfg)?,
        CommandKind::Lipschitz => lipschitz_suite(cfg)?,
    };
    Ok(Report { config: cfg.clone(), checks, wall_clock: start.elapsed() })
}

fn trial_rng(seed: u64, tag: u64, trial: usize) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag)
        .wrapping_add((trial as u64).wrapping_mul(0x517C_C1B7_2722_0A95));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn random_dense(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
        )
    })
}

/// The configured block composition, rotated into generic position.
fn family_for(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<ProjectionFamily, EngineError> {
    let rotation = expm_skew(&random_skew_unit(cfg.dim, rng).scaled(0.8));
    let mut frames = Vec::with_capacity(cfg.blocks.len());
    let mut offset = 0;
    for &r in &cfg.blocks {
        frames.push(rotation.matrix().view((0, offset), (cfg.dim, r)).into_owned());
        offset += r;
    }
    Ok(ProjectionFamily::new(frames)?)
}

fn block_diag_skew(
    fam: &ProjectionFamily,
    rng: &mut ChaCha8Rng,
) -> Result<SkewHermitian, EngineError> {
    let raw = SkewHermitian::skew_part(&random_dense(fam.dim(), rng));
    Ok(SkewHermitian::new(fam.block_diagonal_part(raw.matrix())?)?)
}

/// Maps trials in parallel (order-preserving) and folds the worst case
/// of each tracked quantity.
fn fold_trials<T: Send>(
    trials: usize,
    f: impl Fn(usize) -> Result<T, EngineError> + Sync,
) -> Result<Vec<T>, EngineError> {
    (0..trials).into_par_iter().map(|t| f(t)).collect()
}

fn fold_max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// One verify trial: worst-case residuals for every library layer.
struct VerifyTrial {
    pinch_idem: f64,
    pinch_adjoint: f64,
    pinch_contraction: f64,
    pinch_unit: f64,
    isotropy_disagreements: f64,
    commutator_slack: f64,
    tangent_idem: f64,
    tangent_recover: f64,
    section_residual: f64,
    section_image: f64,
    section_factor_slack: f64,
    quotient_closed: f64,
    quotient_drift: f64,
    gap_residual: f64,
    gap_violations: f64,
}

fn verify_trial(cfg: &ExperimentConfig, trial: usize) -> Result<VerifyTrial, EngineError> {
    let mut rng = trial_rng(cfg.seed, 0x01, trial);
    let n = cfg.dim;
    let fam = family_for(cfg, &mut rng)?;
    let x = random_dense(n, &mut rng);
    let scale = 1.0 + max_abs(&x);

    let px = fam.pinch(&x)?;
    let pinch_idem = max_abs(&(fam.pinch(&px)? - &px)) / scale;
    let pinch_adjoint = max_abs(&(fam.pinch(&x.adjoint())? - px.adjoint())) / scale;
    let pinch_contraction = cfg.norm.ideal_norm(&px) - cfg.norm.ideal_norm(&x);
    let base = OrbitPoint::base_point(&fam);
    let pinch_unit = (super_norm_s2(&base.to_super())? - 1.0).abs();

    // Isotropy: one constructed member and one generic unitary, both put
    // through the full superoperator-commutation oracle.
    let mut isotropy_disagreements = 0.0;
    let member = expm_skew(&block_diag_skew(&fam, &mut rng)?);
    let generic = random_unitary_near_identity(n, 0.5, cfg.seed ^ (trial as u64) << 8);
    for u in [member, generic] {
        let mut commutes = true;
        'outer: for a in 0..n {
            for b in 0..n {
                let mut e = CMatrix::zeros(n, n);
                e[(a, b)] = Complex64::new(1.0, 0.0);
                let lhs = u.matrix() * fam.pinch(&e)?;
                let rhs = fam.pinch(&(u.matrix() * e))?;
                if max_abs(&(lhs - rhs)) > 1e-9 {
                    commutes = false;
                    break 'outer;
                }
            }
        }
        let claimed = pinchlab::orbit::in_isotropy_G(&fam, &u, 1e-9)?;
        if claimed != commutes {
            isotropy_disagreements += 1.0;
        }
    }

    // Commutator lower bound in the configured norm.
    let mut target: f64 = 0.0;
    for i in 1..=fam.block_count() {
        for j in 0..=fam.block_count() {
            if i == j || fam.rank(j)? == 0 {
                continue;
            }
            target = target.max(op_norm(&(fam.projection(i)? * &x * fam.projection(j)?)));
        }
    }
    let est = super_norm_estimate(&commutator_super(&x, &fam), &cfg.norm, 2, cfg.seed)?;
    let commutator_slack = target - est.lower;

    // Tangent projection: idempotence on a structured tree and exact
    // recovery of off-block generators on commutator inputs.
    let tree = SuperOperator::sum(
        SuperOperator::compose(
            SuperOperator::LeftMul(random_dense(n, &mut rng)),
            SuperOperator::Pinch(fam.clone()),
        ),
        SuperOperator::scale(
            Complex64::new(0.6, 0.3),
            SuperOperator::RightMul(random_dense(n, &mut rng)),
        ),
    );
    let variant = TangentVariant::DistinguishedP0;
    let e1 = tangent_project(&fam, &tree, &variant)?;
    let e2 = tangent_project(&fam, &e1.to_super(), &variant)?;
    let tangent_idem = max_abs(
        &fam.off_diagonal_part(&(e1.generator().matrix() - e2.generator().matrix()))?,
    );
    let z = random_skew_unit(n, &mut rng);
    let recovered = tangent_project(&fam, &commutator_super(z.matrix(), &fam), &variant)?;
    let tangent_recover =
        max_abs(&(recovered.generator().matrix() - fam.off_diagonal_part(z.matrix())?));

    // Cross section at a trial-dependent arc parameter t <= 0.1.
    let t = 0.01 + 0.09 * (trial as f64 / cfg.trials.max(1) as f64);
    let z_arc = SkewHermitian::new(fam.off_diagonal_part(random_skew_unit(n, &mut rng).matrix())?)?
        .scaled(t);
    let q = conjugate(&expm_skew(&z_arc), &base)?;
    let sigma = cross_section(&fam, &q)?;
    let reconj = conjugate(&sigma, &base)?;
    let section_residual = super_norm_s2(&reconj.difference_super(&q))?;
    let mut section_image: f64 = 0.0;
    for i in 0..=fam.block_count() {
        let moved = sigma.matrix() * fam.projection(i)? * sigma.matrix().adjoint();
        section_image = section_image.max(max_abs(&(moved - f_map(&fam, i, &q)?)));
    }
    let gap_norm = super_norm_s2(&q.difference_super(&base))?;
    let s = section_factor(&fam, &q)?;
    let section_factor_slack =
        op_norm(&(s - CMatrix::identity(n, n))) - 3.0 * gap_norm;

    // Quotient norm: exact Schatten-2 closed form and coset invariance.
    let z_q = random_skew_unit(n, &mut rng);
    let solver = SolverConfig::default();
    let s2 = pinchlab::norms::SymmetricNorm::schatten(2.0).unwrap();
    let closed = quotient_norm(&fam, &z_q, &s2, &solver)?;
    let quotient_closed = (closed.value - s2_norm(&fam.off_diagonal_part(z_q.matrix())?)).abs();
    let q_here = quotient_norm(&fam, &z_q, &cfg.norm, &solver)?;
    let shift = SkewHermitian::new(z_q.matrix() + block_diag_skew(&fam, &mut rng)?.matrix())?;
    let q_there = quotient_norm(&fam, &shift, &cfg.norm, &solver)?;
    let quotient_drift = (q_here.value - q_there.value).abs();

    // Eigenvalue-gap identity on a synthetic normal operator.
    let w = 2 + trial % 2;
    let eigenvalues: Vec<Complex64> = (0..w)
        .map(|i| {
            Complex64::new(1.0 + i as f64, 0.4 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect();
    let mut mults = vec![1usize; w];
    let mut used = w;
    if used < n && trial % 3 == 0 {
        mults[0] += 1;
        used += 1;
    }
    let spec = NormalOperatorSpec::from_eigenvalues(eigenvalues, mults, n - used)?;
    let u = expm_skew(&random_skew_unit(spec.dim(), &mut rng).scaled(0.7));
    let gap = gap_inequality_check(&spec, &u, &cfg.norm)?;
    let gap_residual = gap.max_identity_residual;
    let gap_violations = if gap.all_hold { 0.0 } else { 1.0 };

    Ok(VerifyTrial {
        pinch_idem,
        pinch_adjoint,
        pinch_contraction,
        pinch_unit,
        isotropy_disagreements,
        commutator_slack,
        tangent_idem,
        tangent_recover,
        section_residual,
        section_image,
        section_factor_slack,
        quotient_closed,
        quotient_drift,
        gap_residual,
        gap_violations,
    })
}

fn verify(cfg: &ExperimentConfig) -> SuiteResult {
    let trials = fold_trials(cfg.trials, |t| verify_trial(cfg, t))?;
    let max = |f: fn(&VerifyTrial) -> f64| fold_max(trials.iter().map(f));
    Ok(vec![
        CheckRecord::upper(
            "pinch-idempotent",
            "a pinching applied twice is the pinching itself",
            max(|t| t.pinch_idem),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "pinch-adjoint",
            "pinchings commute with the adjoint",
            max(|t| t.pinch_adjoint),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "pinch-contraction",
            "pinchings contract the configured symmetric norm",
            max(|t| t.pinch_contraction),
            0.0,
            1e-10,
        ),
        CheckRecord::upper(
            "pinch-unit-super-norm",
            "pinchings have unit superoperator norm on the Schatten-2 space",
            max(|t| t.pinch_unit),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "isotropy-agreement",
            "block-diagonal unitaries are exactly the superoperator-commuting ones",
            max(|t| t.isotropy_disagreements),
            0.0,
            0.0,
        ),
        CheckRecord::upper(
            "commutator-lower-bound",
            "the commutator superoperator norm dominates every off-corner block",
            max(|t| t.commutator_slack),
            0.0,
            1e-10,
        ),
        CheckRecord::upper(
            "tangent-idempotent",
            "the tangent projection is idempotent",
            max(|t| t.tangent_idem),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "tangent-recovery",
            "the tangent projection recovers off-block generators of commutators",
            max(|t| t.tangent_recover),
            0.0,
            1e-10,
        ),
        CheckRecord::upper(
            "section-reconjugation",
            "the polarised section reconjugates the base point",
            max(|t| t.section_residual),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "section-image-match",
            "the section carries each block projection onto its image",
            max(|t| t.section_image),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "section-factor-bound",
            "the raw section factor stays within three orbit gaps of the identity",
            max(|t| t.section_factor_slack),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "quotient-closed-form",
            "the Schatten-2 quotient norm equals the off-block norm",
            max(|t| t.quotient_closed),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "quotient-shift-invariance",
            "the quotient norm depends only on the coset",
            max(|t| t.quotient_drift),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "gap-identity",
            "corner blocks of the commutator scale by eigenvalue gaps",
            max(|t| t.gap_residual),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "gap-inequality",
            "corner block norms are bounded by gap-scaled commutator norms",
            max(|t| t.gap_violations),
            0.0,
            0.0,
        ),
    ])
}

fn fiber_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let mut rng = trial_rng(cfg.seed, 0x02, 0);
    let fam = family_for(cfg, &mut rng)?;
    let u = expm_skew(&random_skew_unit(cfg.dim, &mut rng).scaled(0.9));
    let q = conjugate(&u, &OrbitPoint::base_point(&fam))?;
    let points = fiber(&fam, &q, None)?;

    // Expected cardinality: rank-preserving relabelings of the blocks.
    let mut rank_counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for i in 1..=fam.block_count() {
        *rank_counts.entry(fam.rank(i)?).or_insert(0) += 1;
    }
    let expected: f64 = rank_counts
        .values()
        .map(|&c| (1..=c).map(|k| k as f64).product::<f64>())
        .product();

    let mut checks = vec![CheckRecord {
        check: "fiber-cardinality".into(),
        anchor: "the fiber is the set of rank-preserving block relabelings".into(),
        pass: points.len() as f64 == expected,
        measured: points.len() as f64,
        bound: expected,
        tolerance: 0.0,
    }];

    if points.len() >= 2 {
        let mut min_sep = f64::INFINITY;
        for a in 0..points.len() {
            for b in (a + 1)..points.len() {
                min_sep = min_sep.min(super_norm_s2(&points[a].difference_super(&points[b]))?);
            }
        }
        checks.push(CheckRecord::lower(
            "fiber-separation",
            "distinct fiber points are uniformly separated",
            min_sep,
            1.0,
            1e-9,
        ));
    }
    Ok(checks)
}

struct SectionTrial {
    residual: f64,
    image: f64,
    factor_slack: f64,
}

fn section_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let trials = fold_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, 0x03, trial);
        let fam = family_for(cfg, &mut rng)?;
        let base = OrbitPoint::base_point(&fam);
        let t = 0.005 + 0.095 * (trial as f64 / cfg.trials as f64);
        let z = SkewHermitian::new(
            fam.off_diagonal_part(random_skew_unit(cfg.dim, &mut rng).matrix())?,
        )?
        .scaled(t);
        let q = conjugate(&expm_skew(&z), &base)?;
        let sigma = cross_section(&fam, &q)?;
        let residual = super_norm_s2(&conjugate(&sigma, &base)?.difference_super(&q))?;
        let mut image: f64 = 0.0;
        for i in 0..=fam.block_count() {
            let moved = sigma.matrix() * fam.projection(i)? * sigma.matrix().adjoint();
            image = image.max(max_abs(&(moved - f_map(&fam, i, &q)?)));
        }
        let s = section_factor(&fam, &q)?;
        let gap = super_norm_s2(&q.difference_super(&base))?;
        let factor_slack = op_norm(&(s - CMatrix::identity(cfg.dim, cfg.dim))) - 3.0 * gap;
        Ok(SectionTrial { residual, image, factor_slack })
    })?;
    Ok(vec![
        CheckRecord::upper(
            "section-reconjugation",
            "the polarised section reconjugates the base point",
            fold_max(trials.iter().map(|t| t.residual)),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "section-image-match",
            "the section carries each block projection onto its image",
            fold_max(trials.iter().map(|t| t.image)),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "section-factor-bound",
            "the raw section factor stays within three orbit gaps of the identity",
            fold_max(trials.iter().map(|t| t.factor_slack)),
            0.0,
            1e-9,
        ),
    ])
}

struct DistanceTrial {
    order_slack: f64,
    ceiling_slack: f64,
}

fn distance_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let solver = SolverConfig { restarts: 1, descent_passes: 1, ..SolverConfig::default() };
    let trials = fold_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, 0x04, trial);
        let fam = family_for(cfg, &mut rng)?;
        let scale = 0.2 + 0.7 * (trial as f64 / cfg.trials as f64);
        let z = random_skew_unit(cfg.dim, &mut rng).scaled(scale);
        let q = conjugate(&expm_skew(&z), &OrbitPoint::base_point(&fam))?;
        let db = distance_bounds(&fam, &q, &cfg.norm, &solver)?;
        Ok(DistanceTrial {
            order_slack: db.lower - db.upper,
            ceiling_slack: db.upper - cfg.norm.ideal_norm(z.matrix()),
        })
    })?;

    let mut rng = trial_rng(cfg.seed, 0x04, cfg.trials);
    let fam = family_for(cfg, &mut rng)?;
    let at_base =
        distance_bounds(&fam, &OrbitPoint::base_point(&fam), &cfg.norm, &solver)?;

    Ok(vec![
        CheckRecord::upper(
            "distance-order",
            "the certified lower bound never crosses the curve-length upper bound",
            fold_max(trials.iter().map(|t| t.order_slack)),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "distance-arc-ceiling",
            "exponential arcs witness their own length as an upper bound",
            fold_max(trials.iter().map(|t| t.ceiling_slack)),
            0.0,
            1e-9,
        ),
        CheckRecord::upper(
            "distance-base-point",
            "both bounds collapse at the base point",
            at_base.lower.max(at_base.upper),
            0.0,
            1e-9,
        ),
    ])
}

fn topology_gap_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let k_max = cfg.trials;
    let table = topology_gap_table(&cfg.norm, k_max, GapScenario::GrowingW)?;
    let mut checks = Vec::new();
    for row in &table {
        checks.push(CheckRecord::upper(
            &format!("displacement-bound-k{}", row.k),
            "conjugating by a unit-norm generator moves the pinching at most exponentially",
            row.displacement,
            row.bound,
            1e-12,
        ));
    }
    let unit_defect = fold_max(
        table.iter().filter(|r| !r.degenerate).map(|r| (r.phi_norm - 1.0).abs()),
    );
    checks.push(CheckRecord::upper(
        "unit-generator-norm",
        "every generator in the sequence has unit symmetric norm",
        if unit_defect.is_finite() { unit_defect } else { 0.0 },
        0.0,
        1e-12,
    ));
    let worst_increase = fold_max(
        table.windows(2).map(|w| w[1].displacement - w[0].displacement),
    );
    checks.push(CheckRecord::upper(
        "displacement-monotone",
        "orbit displacement shrinks as the construction deepens",
        if worst_increase.is_finite() { worst_increase } else { 0.0 },
        0.0,
        1e-9,
    ));
    Ok(checks)
}

struct NormalTrial {
    identity_residual: f64,
    violations: f64,
}

fn normal_orbit_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let trials = fold_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, 0x05, trial);
        // Rejection-sample well-separated nonzero eigenvalues.
        let w = 2 + trial % 3;
        let mut eigenvalues: Vec<Complex64> = Vec::new();
        while eigenvalues.len() < w {
            let l = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if l.norm() > 0.3 && eigenvalues.iter().all(|m| (l - m).norm() > 0.3) {
                eigenvalues.push(l);
            }
        }
        let mut mults = vec![1usize; w];
        let mut used = w;
        if used < cfg.dim && trial % 2 == 0 {
            mults[0] += 1;
            used += 1;
        }
        let kernel = (cfg.dim - used).min(1);
        let spec = NormalOperatorSpec::from_eigenvalues(eigenvalues, mults, kernel)?;
        let u = expm_skew(&random_skew_unit(spec.dim(), &mut rng).scaled(rng.gen_range(0.3..1.2)));
        let report = gap_inequality_check(&spec, &u, &cfg.norm)?;
        Ok(NormalTrial {
            identity_residual: report.max_identity_residual,
            violations: if report.all_hold { 0.0 } else { 1.0 },
        })
    })?;

    // Swap experiment on the harmonic spectrum: each step moves the
    // operator by exactly one eigenvalue gap but the pinching by a full
    // unit, for every admissible index.
    let m = cfg.dim.clamp(2, 16);
    let eigenvalues: Vec<Complex64> =
        (1..=m).map(|i| Complex64::new(1.0 / i as f64, 0.0)).collect();
    let spec = NormalOperatorSpec::from_eigenvalues(eigenvalues, vec![1; m], 0)?;
    let a = spec.matrix()?;
    let base = OrbitPoint::base_point(spec.family());
    let mut worst_gap_defect: f64 = 0.0;
    let mut min_pinch_move = f64::INFINITY;
    for n in 0..=(m - 2) {
        let u = swap_sequence_un(&spec, n, None)?;
        let a_move = op_norm(&(u.matrix() * &a * u.matrix().adjoint() - &a));
        let gap = (spec.eigenvalue(n + 1)?.norm() - spec.eigenvalue(n + 2)?.norm()).abs();
        worst_gap_defect = worst_gap_defect.max((a_move - gap).abs());
        let moved = conjugate(&u, &base)?;
        min_pinch_move = min_pinch_move.min(super_norm_s2(&moved.difference_super(&base))?);
    }

    Ok(vec![
        CheckRecord::upper(
            "gap-identity",
            "corner blocks of the commutator scale by eigenvalue gaps",
            fold_max(trials.iter().map(|t| t.identity_residual)),
            0.0,
            1e-12,
        ),
        CheckRecord::upper(
            "gap-inequality",
            "corner block norms are bounded by gap-scaled commutator norms",
            fold_max(trials.iter().map(|t| t.violations)),
            0.0,
            0.0,
        ),
        CheckRecord::upper(
            "swap-moves-operator-by-gap",
            "each swap moves the operator by exactly one eigenvalue gap",
            worst_gap_defect,
            0.0,
            1e-12,
        ),
        CheckRecord::lower(
            "swap-moves-pinching-fully",
            "every swap displaces the pinching by at least a full unit",
            min_pinch_move,
            1.0,
            1e-9,
        ),
    ])
}

struct LipschitzTrial {
    block_slack: f64,
    complement_slack: f64,
}

fn lipschitz_suite(cfg: &ExperimentConfig) -> SuiteResult {
    let trials = fold_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, 0x06, trial);
        let fam = family_for(cfg, &mut rng)?;
        let u = random_unitary_near_identity(cfg.dim, 0.4, cfg.seed ^ ((trial as u64) << 16));
        let base = OrbitPoint::base_point(&fam);
        let moved = conjugate(&u, &base)?;
        let gap = super_norm_s2(&moved.difference_super(&base))?;
        let w = fam.block_count();
        let c = (1..=w).map(|i| fam.rank(i).unwrap_or(0)).max().unwrap_or(1);
        let factor = 2.0 * (w as f64) * (c as f64);
        let mut block_slack = f64::NEG_INFINITY;
        for i in 0..=w {
            let p = fam.projection(i)?;
            let d = s2_norm(&(u.matrix() * &p * u.matrix().adjoint() - &p));
            block_slack = block_slack.max(d - factor * gap);
        }
        let p0 = fam.projection(0)?;
        let d0 = op_norm(&(u.matrix() * &p0 * u.matrix().adjoint() - &p0));
        Ok(LipschitzTrial { block_slack, complement_slack: d0 - 2.0 * gap })
    })?;
    Ok(vec![
        CheckRecord::upper(
            "moved-projection-bound",
            "projection displacement is Lipschitz in the orbit gap",
            fold_max(trials.iter().map(|t| t.block_slack)),
            0.0,
            1e-8,
        ),
        CheckRecord::upper(
            "moved-complement-bound",
            "the complement moves by at most twice the orbit gap in operator norm",
            fold_max(trials.iter().map(|t| t.complement_slack)),
            0.0,
            1e-8,
        ),
    ])
}
