//! Synthetic instances with known solutions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    MapModel, MonotonicityClass, NoiseModel, ProblemConstants, QuadraticObjective, Scaling,
    ScviProblem,
};
use crate::block::BlockLayout;
use crate::error::{invalid, Result, ScviError};
use crate::geometry::{BlockGeometry, ComponentSet, Norm};
use crate::linalg::{gaussian_matrix, skew_with_norm, symmetric_with_spectrum, Matrix};
use crate::rng::NoiseStream;
use crate::solvers::solve_deterministic;

/// Component set used for every block of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    /// `[-half_width, half_width]^n_i` with the Euclidean generator.
    Box { half_width: f64 },
    /// Centered Euclidean ball.
    Ball { radius: f64 },
    /// Probability simplex with the entropy generator.
    Simplex,
}

impl Default for SetKind {
    fn default() -> Self {
        SetKind::Box { half_width: 1.0 }
    }
}

impl SetKind {
    pub fn geometries(self, blocks: usize, block_size: usize) -> Result<Vec<BlockGeometry>> {
        (0..blocks)
            .map(|_| match self {
                SetKind::Box { half_width } => {
                    if !(half_width > 0.0 && half_width.is_finite()) {
                        return Err(invalid("half_width", format!("{half_width} is not positive")));
                    }
                    Ok(BlockGeometry::euclidean(ComponentSet::cube(
                        block_size,
                        -half_width,
                        half_width,
                    )?))
                }
                SetKind::Ball { radius } => Ok(BlockGeometry::euclidean(ComponentSet::ball(
                    vec![0.0; block_size],
                    radius,
                )?)),
                SetKind::Simplex => BlockGeometry::entropy_simplex(block_size),
            })
            .collect()
    }
}

/// Interior point of every block, drawn away from the boundary.
fn interior_solution(geoms: &[BlockGeometry], stream: &mut NoiseStream) -> Result<Vec<f64>> {
    let mut x = Vec::new();
    for g in geoms {
        x.extend(g.set.interior_point(stream.rng())?);
    }
    Ok(x)
}

fn check_shape(blocks: usize, block_size: usize) -> Result<()> {
    if blocks == 0 || block_size == 0 {
        return Err(invalid("blocks", "need at least one block of positive size"));
    }
    Ok(())
}

fn check_noise(noise: f64) -> Result<()> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(invalid("noise", format!("{noise} is not a valid standard deviation")));
    }
    Ok(())
}

/// Strong-monotonicity modulus in the composite norm for a matrix whose symmetric part
/// has smallest eigenvalue `lambda_min`; `l1` blocks lose a factor of the block size.
fn composite_modulus(lambda_min: f64, geoms: &[BlockGeometry]) -> f64 {
    let worst = geoms
        .iter()
        .map(|g| match g.norm {
            Norm::L2 => 1.0,
            Norm::L1 => g.dim() as f64,
        })
        .fold(1.0, f64::max);
    lambda_min / worst
}

/// `F(x) = A(x - x_bar)`, so that `F(x_bar) = 0` and `x_bar` solves the VI.
pub fn affine_with_solution(
    name: &str,
    seed: u64,
    geometries: Vec<BlockGeometry>,
    matrix: Matrix,
    solution: Vec<f64>,
    noise: NoiseModel,
    class: MonotonicityClass,
) -> Result<ScviProblem> {
    let layout = BlockLayout::new(geometries.iter().map(|g| g.dim()).collect())?;
    if matrix.cols() != solution.len() {
        return Err(ScviError::DimensionMismatch {
            expected: matrix.cols(),
            got: solution.len(),
        });
    }
    let offset: Vec<f64> = matrix.mul_vec(&solution).into_iter().map(|v| -v).collect();
    let map = MapModel::Affine { matrix, offset };
    let mu = match class {
        MonotonicityClass::StronglyPseudoMonotone { mu } => Some(mu),
        _ => None,
    };
    let constants = ProblemConstants::analytic(&geometries, &layout, &map, &noise, mu);
    ScviProblem::new(name, seed, geometries, map, noise, class, constants)?
        .with_known_solution(solution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StronglyMonotoneParams {
    pub blocks: usize,
    pub block_size: usize,
    pub mu: f64,
    /// Cap on the spectral norm of `A`.
    pub l_bound: f64,
    pub noise: f64,
    #[serde(default)]
    pub set: SetKind,
    pub seed: u64,
}

/// `F(x) = Ax + b` with `A = mu I + S + Q`, `S` skew and `Q` positive semidefinite,
/// each contributing at most `(l_bound - mu)/2` to the norm, and `b = -A x_bar`.
pub fn make_strongly_monotone_affine(p: &StronglyMonotoneParams) -> Result<ScviProblem> {
    check_shape(p.blocks, p.block_size)?;
    check_noise(p.noise)?;
    if !(p.mu > 0.0 && p.mu.is_finite()) {
        return Err(invalid("mu", format!("{} is not positive", p.mu)));
    }
    if !(p.l_bound >= p.mu && p.l_bound.is_finite()) {
        return Err(invalid("l_bound", format!("{} is below mu = {}", p.l_bound, p.mu)));
    }
    let geoms = p.set.geometries(p.blocks, p.block_size)?;
    let n = p.blocks * p.block_size;
    let mut stream = NoiseStream::new(p.seed, 0);
    let half = 0.5 * (p.l_bound - p.mu);
    let mut spectrum: Vec<f64> = (0..n).map(|_| half * stream.uniform()).collect();
    spectrum[0] = 0.0;
    let q = symmetric_with_spectrum(stream.rng(), &spectrum);
    let s = skew_with_norm(stream.rng(), n, half);
    let a = DMatrix::identity(n, n) * p.mu + q + s;
    let x_bar = interior_solution(&geoms, &mut stream)?;
    let mu = composite_modulus(p.mu, &geoms);
    affine_with_solution(
        "strongly_monotone_affine",
        p.seed,
        geoms,
        Matrix::from_dmatrix(&a),
        x_bar,
        NoiseModel::uniform(p.blocks, p.noise),
        MonotonicityClass::StronglyPseudoMonotone { mu },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneAffineParams {
    pub blocks: usize,
    pub block_size: usize,
    /// Spectral norm of the skew part.
    pub skew_norm: f64,
    /// Largest eigenvalue of the positive semidefinite part.
    pub psd_norm: f64,
    /// Number of zero eigenvalues of the positive semidefinite part.
    #[serde(default = "one")]
    pub psd_zeros: usize,
    pub noise: f64,
    #[serde(default)]
    pub set: SetKind,
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// `F(x) = Ax + b` with `A = S + Q`, `S` skew and `Q` rank-deficient positive
/// semidefinite: monotone but not strongly monotone.
pub fn make_monotone_affine(p: &MonotoneAffineParams) -> Result<ScviProblem> {
    check_shape(p.blocks, p.block_size)?;
    check_noise(p.noise)?;
    if !(p.skew_norm >= 0.0 && p.psd_norm >= 0.0) {
        return Err(invalid("skew_norm", "norms must be nonnegative"));
    }
    let n = p.blocks * p.block_size;
    if p.psd_zeros == 0 || p.psd_zeros > n {
        return Err(invalid("psd_zeros", format!("must lie in [1, {n}]")));
    }
    let geoms = p.set.geometries(p.blocks, p.block_size)?;
    let mut stream = NoiseStream::new(p.seed, 0);
    let spectrum: Vec<f64> = (0..n)
        .map(|j| {
            if j < p.psd_zeros {
                0.0
            } else {
                p.psd_norm * stream.uniform()
            }
        })
        .collect();
    let q = symmetric_with_spectrum(stream.rng(), &spectrum);
    let s = skew_with_norm(stream.rng(), n, p.skew_norm);
    let x_bar = interior_solution(&geoms, &mut stream)?;
    affine_with_solution(
        "monotone_affine",
        p.seed,
        geoms,
        Matrix::from_dmatrix(&(q + s)),
        x_bar,
        NoiseModel::uniform(p.blocks, p.noise),
        MonotonicityClass::Monotone,
    )
}

/// `F~(x) = s(x) F(x)` for a strongly monotone affine base.
///
/// Positive scaling keeps the solution and the sign of `<F(y), x - y>`, so the result is
/// strictly (indeed `s_min mu`-strongly) pseudo-monotone, while the product with a
/// non-constant scalar generally breaks monotonicity.
pub fn make_strictly_pseudo_monotone(base: &ScviProblem, scaling: Scaling) -> Result<ScviProblem> {
    let (a, b) = base.map().affine().ok_or_else(|| {
        ScviError::NotApplicable("scaling needs an affine base map".into())
    })?;
    let mu = match base.class() {
        MonotonicityClass::StronglyPseudoMonotone { mu } => mu,
        other => {
            return Err(ScviError::NotApplicable(format!(
                "scaling needs a strongly monotone base, got {other:?}"
            )))
        }
    };
    if scaling.direction.len() != base.dim() {
        return Err(ScviError::DimensionMismatch {
            expected: base.dim(),
            got: scaling.direction.len(),
        });
    }
    if !(scaling.min_value() > 0.0) || !scaling.max_value().is_finite() {
        return Err(invalid(
            "scaling",
            format!("range [{}, {}] is not bounded away from zero", scaling.min_value(), scaling.max_value()),
        ));
    }
    let map = MapModel::ScaledAffine {
        matrix: a.clone(),
        offset: b.to_vec(),
        scaling: scaling.clone(),
    };
    let geoms = base.geometries().to_vec();
    let constants = ProblemConstants::analytic(
        &geoms,
        base.layout(),
        &map,
        base.noise(),
        Some(mu * scaling.min_value()),
    );
    let mut p = ScviProblem::new(
        "strictly_pseudo_monotone",
        base.seed(),
        geoms,
        map,
        base.noise().clone(),
        MonotonicityClass::StrictlyPseudoMonotone,
        constants,
    )?;
    if let Some(x) = base.known_solution() {
        p = p.with_known_solution(x.as_slice().to_vec())?;
    }
    Ok(p)
}

/// Curvature spectrum of a quadratic objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    Explicit { values: Vec<f64> },
    /// `zeros` exact zeros, the rest uniform on `[min, max]`.
    Uniform { min: f64, max: f64, zeros: usize },
}

/// Linear term `c` of a quadratic objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearTerm {
    Zero,
    Gaussian { scale: f64 },
    /// `c_j = s_j (h sum_l |Q_jl| + margin)` with random signs `s_j`, which makes the box
    /// corner `-h s` the minimiser with every gradient coordinate at least `margin` away
    /// from zero.
    VertexDominant { margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopParams {
    pub blocks: usize,
    pub block_size: usize,
    pub spectrum: Spectrum,
    pub linear: LinearTerm,
    pub noise: f64,
    #[serde(default)]
    pub set: SetKind,
    pub seed: u64,
}

/// `f(x) = x^T Q x / 2 + c^T x` with `F = grad f`.
pub fn make_scop_quadratic(p: &ScopParams) -> Result<ScviProblem> {
    check_shape(p.blocks, p.block_size)?;
    check_noise(p.noise)?;
    let n = p.blocks * p.block_size;
    let geoms = p.set.geometries(p.blocks, p.block_size)?;
    let mut stream = NoiseStream::new(p.seed, 0);
    let spectrum = match &p.spectrum {
        Spectrum::Explicit { values } => {
            if values.len() != n {
                return Err(ScviError::DimensionMismatch {
                    expected: n,
                    got: values.len(),
                });
            }
            values.clone()
        }
        Spectrum::Uniform { min, max, zeros } => {
            if !(min <= max) || *zeros > n {
                return Err(invalid("spectrum", "need min <= max and zeros <= dimension"));
            }
            (0..n)
                .map(|j| if j < *zeros { 0.0 } else { min + (max - min) * stream.uniform() })
                .collect()
        }
    };
    if spectrum.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("spectrum", "negative curvature requested"));
    }
    let q = if spectrum.iter().all(|v| *v == spectrum[0]) {
        DMatrix::identity(n, n) * spectrum[0]
    } else {
        symmetric_with_spectrum(stream.rng(), &spectrum)
    };
    let q = Matrix::from_dmatrix(&q);
    let mut known = None;
    let c: Vec<f64> = match p.linear {
        LinearTerm::Zero => vec![0.0; n],
        LinearTerm::Gaussian { scale } => (0..n).map(|_| scale * stream.standard_normal()).collect(),
        LinearTerm::VertexDominant { margin } => {
            let SetKind::Box { half_width } = p.set else {
                return Err(invalid("linear", "vertex-dominant term needs box sets"));
            };
            if !(margin > 0.0) {
                return Err(invalid("margin", "must be positive"));
            }
            let signs: Vec<f64> = (0..n)
                .map(|_| if stream.uniform() < 0.5 { -1.0 } else { 1.0 })
                .collect();
            known = Some(signs.iter().map(|s| -half_width * s).collect::<Vec<f64>>());
            (0..n)
                .map(|j| {
                    let row: f64 = q.row(j).iter().map(|v| v.abs()).sum();
                    signs[j] * (half_width * row + margin)
                })
                .collect()
        }
    };
    let map = MapModel::Affine {
        matrix: q.clone(),
        offset: c.clone(),
    };
    let noise = NoiseModel::uniform(p.blocks, p.noise);
    let layout = BlockLayout::new(geoms.iter().map(|g| g.dim()).collect())?;
    let mu = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu = (mu > 0.0).then(|| composite_modulus(mu, &geoms));
    let constants = ProblemConstants::analytic(&geoms, &layout, &map, &noise, mu);
    let problem = ScviProblem::new(
        "scop_quadratic",
        p.seed,
        geoms,
        map,
        noise,
        MonotonicityClass::ConvexGradient,
        constants,
    )?;
    let x_star = match known {
        Some(x) => x,
        None => {
            let start = problem.center();
            solve_deterministic(&problem, &start, 1e-12, 2_000_000)?.x.into_flat()
        }
    };
    let objective = QuadraticObjective {
        optimal_value: 0.0,
        q,
        c,
    };
    let f_star = objective.value(&x_star);
    problem
        .with_known_solution(x_star)?
        .with_objective(QuadraticObjective {
            optimal_value: f_star,
            ..objective
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashParams {
    pub players: usize,
    pub block_size: usize,
    /// Spectral norm of every cross-player coupling block `G_ij`.
    pub coupling: f64,
    pub noise: f64,
    #[serde(default)]
    pub set: SetKind,
    pub seed: u64,
}

/// Quadratic game: player `i` minimises
/// `x_i^T H_i x_i / 2 + x_i^T sum_{j != i} G_ij x_j + c_i^T x_i`, with `H_i` of spectrum
/// in `[1, 2]`. The map stacks the players' partial gradients.
pub fn make_nash_quadratic(p: &NashParams) -> Result<ScviProblem> {
    check_shape(p.players, p.block_size)?;
    check_noise(p.noise)?;
    if !(p.coupling >= 0.0 && p.coupling.is_finite()) {
        return Err(invalid("coupling", "must be nonnegative"));
    }
    let (d, m) = (p.players, p.block_size);
    let n = d * m;
    let geoms = p.set.geometries(d, m)?;
    let mut stream = NoiseStream::new(p.seed, 0);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        let spectrum: Vec<f64> = (0..m).map(|_| 1.0 + stream.uniform()).collect();
        let h = symmetric_with_spectrum(stream.rng(), &spectrum);
        a.view_mut((i * m, i * m), (m, m)).copy_from(&h);
        for j in 0..d {
            if i == j || p.coupling == 0.0 {
                continue;
            }
            let g = gaussian_matrix(stream.rng(), m, m);
            let norm = g.singular_values().iter().cloned().fold(0.0, f64::max);
            a.view_mut((i * m, j * m), (m, m)).copy_from(&(g * (p.coupling / norm)));
        }
    }
    let c: Vec<f64> = (0..n).map(|_| stream.rng().sample::<f64, _>(StandardNormal)).collect();
    let matrix = Matrix::from_dmatrix(&a);
    let lambda_min = matrix.symmetric_part_min_eigenvalue();
    if lambda_min <= 0.0 {
        return Err(ScviError::CertificateFailed(format!(
            "coupling {} leaves the game map without strong monotonicity (min eigenvalue {lambda_min})",
            p.coupling
        )));
    }
    let mu = composite_modulus(lambda_min, &geoms);
    let map = MapModel::Affine { matrix, offset: c };
    let noise = NoiseModel::uniform(d, p.noise);
    let layout = BlockLayout::new(vec![m; d])?;
    let constants = ProblemConstants::analytic(&geoms, &layout, &map, &noise, Some(mu));
    let problem = ScviProblem::new(
        "nash_quadratic",
        p.seed,
        geoms,
        map,
        noise,
        MonotonicityClass::StronglyPseudoMonotone { mu },
        constants,
    )?;
    let sol = solve_deterministic(&problem, &problem.center(), 1e-12, 2_000_000)?;
    problem.with_known_solution(sol.x.into_flat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Draw;

    fn strong(seed: u64) -> StronglyMonotoneParams {
        StronglyMonotoneParams {
            blocks: 3,
            block_size: 2,
            mu: 0.5,
            l_bound: 2.0,
            noise: 0.1,
            set: SetKind::Box { half_width: 1.0 },
            seed,
        }
    }

    #[test]
    fn one_dimensional_solution_offset() {
        let geoms = SetKind::Box { half_width: 1.0 }.geometries(1, 1).unwrap();
        let p = affine_with_solution(
            "t",
            0,
            geoms,
            Matrix::new(1, 1, vec![2.0]).unwrap(),
            vec![0.3],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::StronglyPseudoMonotone { mu: 2.0 },
        )
        .unwrap();
        assert!((p.map().linear_part().1[0] + 0.6).abs() < 1e-15);
        assert_eq!(p.known_solution().unwrap().as_slice(), &[0.3]);
    }

    #[test]
    fn strongly_monotone_spectrum() {
        let p = make_strongly_monotone_affine(&strong(4)).unwrap();
        let (a, _) = p.map().affine().unwrap();
        assert!(a.symmetric_part_min_eigenvalue() >= 0.5 - 1e-10);
        assert!(a.spectral_norm() <= 2.0 + 1e-10);
        let x = p.known_solution().unwrap();
        let f = p.expected_map(x).unwrap();
        assert!(f.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_strongly_monotone_affine(&strong(9)).unwrap();
        let b = make_strongly_monotone_affine(&strong(9)).unwrap();
        let c = make_strongly_monotone_affine(&strong(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_errors() {
        let mut p = strong(0);
        p.mu = 0.0;
        assert!(make_strongly_monotone_affine(&p).is_err());
        let mut p = strong(0);
        p.l_bound = 0.1;
        assert!(make_strongly_monotone_affine(&p).is_err());
        let scop = ScopParams {
            blocks: 1,
            block_size: 2,
            spectrum: Spectrum::Explicit { values: vec![1.0, -0.5] },
            linear: LinearTerm::Zero,
            noise: 0.0,
            set: SetKind::default(),
            seed: 0,
        };
        assert!(make_scop_quadratic(&scop).is_err());
    }

    #[test]
    fn identity_scop() {
        let p = make_scop_quadratic(&ScopParams {
            blocks: 2,
            block_size: 2,
            spectrum: Spectrum::Explicit { values: vec![1.0; 4] },
            linear: LinearTerm::Zero,
            noise: 0.0,
            set: SetKind::default(),
            seed: 1,
        })
        .unwrap();
        assert!(p.known_solution().unwrap().as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(p.objective().unwrap().optimal_value.abs() < 1e-20);
    }

    #[test]
    fn scaled_problem_keeps_solution() {
        let base = make_strongly_monotone_affine(&strong(2)).unwrap();
        let same = make_strictly_pseudo_monotone(
            &base,
            Scaling {
                offset: 1.0,
                amplitude: 0.0,
                direction: vec![1.0; 6],
            },
        )
        .unwrap();
        let x = base.sample_point(&mut NoiseStream::from_seed(3));
        assert_eq!(
            base.expected_map(&x).unwrap(),
            same.expected_map(&x).unwrap()
        );
        let scaled = make_strictly_pseudo_monotone(&base, Scaling::default_for(6)).unwrap();
        assert_eq!(scaled.known_solution(), base.known_solution());
        let bad = Scaling {
            offset: 0.5,
            amplitude: 1.0,
            direction: vec![1.0; 6],
        };
        assert!(make_strictly_pseudo_monotone(&base, bad).is_err());
    }

    #[test]
    fn nash_coupling_too_strong() {
        let r = make_nash_quadratic(&NashParams {
            players: 4,
            block_size: 2,
            coupling: 5.0,
            noise: 0.0,
            set: SetKind::default(),
            seed: 3,
        });
        assert!(matches!(r, Err(ScviError::CertificateFailed(_))));
    }

    #[test]
    fn sampling_noise_has_declared_variance() {
        let p = make_strongly_monotone_affine(&strong(5)).unwrap();
        let x = p.center();
        let f = p.expected_map(&x).unwrap();
        let mut s = NoiseStream::from_seed(8);
        let n = 20_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let v = p.sample_map(&x, &mut s, Draw::Update).unwrap();
            let e: Vec<f64> = v.block(0).iter().zip(f.block(0)).map(|(a, b)| a - b).collect();
            sq += crate::block::dot(&e, &e);
        }
        let var = sq / n as f64;
        assert!(var <= 1.1 * 0.01 && var >= 0.9 * 0.01);
    }
}
