//! Problem instances: the expected map `F`, its stochastic oracle, the block structure,
//! the declared monotonicity class, ground truth and the problem constants.

mod certify;
mod generators;

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::block::{dot, BlockLayout, BlockVector};
use crate::error::{check_finite, check_len, invalid, Result, ScviError};
use crate::geometry::{BlockGeometry, Norm};
use crate::linalg::Matrix;
use crate::rng::NoiseStream;

pub use certify::{
    certify_constants, certify_monotonicity, check_solution, BlockConstantCheck, CertificateReport,
    ConstantsReport, MonotonicityTest, SolutionCheck,
};
pub use generators::{
    affine_with_solution, make_monotone_affine, make_nash_quadratic, make_scop_quadratic,
    make_strictly_pseudo_monotone, make_strongly_monotone_affine, LinearTerm, MonotoneAffineParams,
    NashParams, ScopParams, SetKind, Spectrum, StronglyMonotoneParams,
};

/// Declared monotonicity class of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotonicityClass {
    Monotone,
    StrictlyPseudoMonotone,
    StronglyPseudoMonotone { mu: f64 },
    /// Gradient of a convex objective.
    ConvexGradient,
}

impl MonotonicityClass {
    /// The sampling test matching the declared class.
    pub fn default_test(self) -> MonotonicityTest {
        match self {
            MonotonicityClass::Monotone | MonotonicityClass::ConvexGradient => {
                MonotonicityTest::Monotone
            }
            MonotonicityClass::StrictlyPseudoMonotone => MonotonicityTest::StrictlyPseudoMonotone,
            MonotonicityClass::StronglyPseudoMonotone { mu } => {
                MonotonicityTest::StronglyPseudoMonotone { mu }
            }
        }
    }

    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            MonotonicityClass::Monotone | MonotonicityClass::ConvexGradient
        )
    }
}

/// Positive scaling `s(x) = offset + amplitude * sin(<direction, x>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub offset: f64,
    pub amplitude: f64,
    pub direction: Vec<f64>,
}

impl Scaling {
    /// `1.5 + sin(sum_j x_j)`, ranging over `[0.5, 2.5]`.
    pub fn default_for(dim: usize) -> Self {
        Self {
            offset: 1.5,
            amplitude: 1.0,
            direction: vec![1.0; dim],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.offset + self.amplitude * dot(&self.direction, x).sin()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = self.amplitude * dot(&self.direction, x).cos();
        self.direction.iter().map(|d| c * d).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.offset - self.amplitude.abs()
    }

    pub fn max_value(&self) -> f64 {
        self.offset + self.amplitude.abs()
    }
}

/// The expected map `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapModel {
    /// `F(x) = A x + b`.
    Affine { matrix: Matrix, offset: Vec<f64> },
    /// `F(x) = s(x) (A x + b)`.
    ScaledAffine {
        matrix: Matrix,
        offset: Vec<f64>,
        scaling: Scaling,
    },
}

impl MapModel {
    fn parts(&self) -> (&Matrix, &[f64]) {
        match self {
            MapModel::Affine { matrix, offset } | MapModel::ScaledAffine { matrix, offset, .. } => {
                (matrix, offset)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.parts().1.len()
    }

    /// `(A, b)` when the map is exactly affine.
    pub fn affine(&self) -> Option<(&Matrix, &[f64])> {
        match self {
            MapModel::Affine { matrix, offset } => Some((matrix, offset)),
            MapModel::ScaledAffine { .. } => None,
        }
    }

    pub fn scaling(&self) -> Option<&Scaling> {
        match self {
            MapModel::Affine { .. } => None,
            MapModel::ScaledAffine { scaling, .. } => Some(scaling),
        }
    }

    /// The unscaled affine part `(A, b)`.
    pub fn linear_part(&self) -> (&Matrix, &[f64]) {
        self.parts()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_rows_into(0..self.dim(), x, &mut out);
        out
    }

    /// Coordinates `rows` of `F(x)`.
    pub fn eval_rows_into(&self, rows: Range<usize>, x: &[f64], out: &mut [f64]) {
        let (a, b) = self.parts();
        a.mul_rows_into(rows.clone(), x, out);
        for (o, bi) in out.iter_mut().zip(&b[rows]) {
            *o += bi;
        }
        if let Some(s) = self.scaling() {
            let v = s.value(x);
            for o in out.iter_mut() {
                *o *= v;
            }
        }
    }

    /// `J_F(x)^T v`.
    pub fn jacobian_tr_mul(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let (a, b) = self.parts();
        let mut out = a.tr_mul_vec(v);
        if let Some(s) = self.scaling() {
            let sv = s.value(x);
            let mut g = a.mul_vec(x);
            for (gi, bi) in g.iter_mut().zip(b) {
                *gi += bi;
            }
            let gv = dot(&g, v);
            for (o, ds) in out.iter_mut().zip(s.gradient(x)) {
                *o = sv * *o + ds * gv;
            }
        }
        out
    }

    /// Lipschitz constant of `F` in the Euclidean norm over a set of Euclidean radius `radius`.
    pub fn euclidean_lipschitz(&self, radius: f64) -> f64 {
        let (a, b) = self.parts();
        let na = a.spectral_norm();
        match self.scaling() {
            None => na,
            Some(s) => {
                let gmax = na * radius + crate::block::norm2(b);
                s.max_value() * na + s.amplitude.abs() * crate::block::norm2(&s.direction) * gmax
            }
        }
    }
}

/// Additive Gaussian oracle noise: per-block standard deviations of the update
/// draw (`nu`) and of the extrapolation draw (`nu_tilde`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub nu: Vec<f64>,
    pub nu_tilde: Vec<f64>,
}

impl NoiseModel {
    pub fn uniform(blocks: usize, std: f64) -> Self {
        Self {
            nu: vec![std; blocks],
            nu_tilde: vec![std; blocks],
        }
    }

    pub fn std(&self, draw: Draw, block: usize) -> f64 {
        match draw {
            Draw::Extrapolation => self.nu_tilde[block],
            Draw::Update => self.nu[block],
        }
    }
}

/// Which of the two oracle calls of an iteration is being sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    /// `F(x_k, xi~_k)`.
    Extrapolation,
    /// `F(y_{k+1}, xi_k)`.
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    /// Operator-norm formulas for affine maps.
    Analytic,
    /// Maxima over random samples.
    Sampled,
}

/// Per-block `B_i`, `C_i`, `L_i`, `nu_i`, `nu~_i` and the global modulus `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub bounds: Vec<f64>,
    pub map_bounds: Vec<f64>,
    pub lipschitz: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_tilde: Vec<f64>,
    pub mu: Option<f64>,
    pub source: ConstantSource,
}

impl ProblemConstants {
    /// Operator-norm bounds for `F = s(x)(Ax + b)` over the product set.
    pub fn analytic(
        geometries: &[BlockGeometry],
        layout: &BlockLayout,
        map: &MapModel,
        noise: &NoiseModel,
        mu: Option<f64>,
    ) -> Self {
        let (a, b) = map.linear_part();
        let radius = geometries
            .iter()
            .map(|g| g.set.bound(Norm::L2).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut map_bounds = Vec::new();
        let mut lipschitz = Vec::new();
        for (i, g) in geometries.iter().enumerate() {
            let r = layout.range(i);
            let rows = a.submatrix(r.clone(), 0..a.cols());
            // dual norms are dominated by the Euclidean norm for both norm kinds
            let c = rows.spectral_norm() * radius + crate::block::norm2(&b[r.clone()]);
            let diag = a.submatrix(r.clone(), r.clone());
            let l = match g.norm {
                Norm::L2 => diag.spectral_norm(),
                Norm::L1 => diag.max_abs(),
            };
            match map.scaling() {
                None => {
                    map_bounds.push(c);
                    lipschitz.push(l);
                }
                Some(s) => {
                    map_bounds.push(s.max_value() * c);
                    let dir_dual = g.norm.dual(&s.direction[r]);
                    lipschitz.push(s.max_value() * l + s.amplitude.abs() * dir_dual * c);
                }
            }
        }
        Self {
            bounds: geometries.iter().map(BlockGeometry::bound).collect(),
            map_bounds,
            lipschitz,
            nu: noise.nu.clone(),
            nu_tilde: noise.nu_tilde.clone(),
            mu,
            source: ConstantSource::Analytic,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.bounds.len()
    }

    fn validate(&self, d: usize) -> Result<()> {
        for (name, v) in [
            ("bounds", &self.bounds),
            ("map_bounds", &self.map_bounds),
            ("lipschitz", &self.lipschitz),
            ("nu", &self.nu),
            ("nu_tilde", &self.nu_tilde),
        ] {
            if v.len() != d {
                return Err(ScviError::ShapeMismatch(format!(
                    "constant `{name}` has {} entries for {d} blocks",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(invalid("constants", format!("`{name}` must be finite and nonnegative")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(invalid("mu", format!("{mu} is not positive")));
            }
        }
        Ok(())
    }
}

/// `f(x) = x^T Q x / 2 + c^T x` with its optimal value over the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticObjective {
    pub q: Matrix,
    pub c: Vec<f64>,
    pub optimal_value: f64,
}

impl QuadraticObjective {
    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quad_form(x) + dot(&self.c, x)
    }
}

/// A stochastic Cartesian variational inequality instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemDocument", into = "ProblemDocument")]
pub struct ScviProblem {
    name: String,
    seed: u64,
    layout: Arc<BlockLayout>,
    geometries: Vec<BlockGeometry>,
    map: MapModel,
    noise: NoiseModel,
    class: MonotonicityClass,
    known_solution: Option<BlockVector>,
    objective: Option<QuadraticObjective>,
    constants: ProblemConstants,
}

/// Serialized form of [`ScviProblem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub name: String,
    pub seed: u64,
    pub geometries: Vec<BlockGeometry>,
    pub map: MapModel,
    pub noise: NoiseModel,
    pub class: MonotonicityClass,
    pub known_solution: Option<Vec<Vec<f64>>>,
    pub objective: Option<QuadraticObjective>,
    pub constants: ProblemConstants,
}

impl TryFrom<ProblemDocument> for ScviProblem {
    type Error = ScviError;

    fn try_from(doc: ProblemDocument) -> Result<Self> {
        let mut p = ScviProblem::new(
            doc.name,
            doc.seed,
            doc.geometries,
            doc.map,
            doc.noise,
            doc.class,
            doc.constants,
        )?;
        if let Some(sol) = doc.known_solution {
            let v = BlockVector::from_blocks(sol)?;
            p = p.with_known_solution(v.into_flat())?;
        }
        if let Some(obj) = doc.objective {
            p = p.with_objective(obj)?;
        }
        Ok(p)
    }
}

impl From<ScviProblem> for ProblemDocument {
    fn from(p: ScviProblem) -> Self {
        ProblemDocument {
            name: p.name,
            seed: p.seed,
            geometries: p.geometries,
            map: p.map,
            noise: p.noise,
            class: p.class,
            known_solution: p.known_solution.map(Into::into),
            objective: p.objective,
            constants: p.constants,
        }
    }
}

impl ScviProblem {
    pub fn new(
        name: impl Into<String>,
        seed: u64,
        geometries: Vec<BlockGeometry>,
        map: MapModel,
        noise: NoiseModel,
        class: MonotonicityClass,
        constants: ProblemConstants,
    ) -> Result<Self> {
        for g in &geometries {
            g.validate()?;
        }
        let layout = Arc::new(BlockLayout::new(geometries.iter().map(|g| g.dim()).collect())?);
        let n = layout.dim();
        let d = layout.num_blocks();
        let (a, b) = map.linear_part();
        if a.rows() != n || a.cols() != n {
            return Err(ScviError::ShapeMismatch(format!(
                "map matrix is {}x{} for dimension {n}",
                a.rows(),
                a.cols()
            )));
        }
        check_len(n, b.len())?;
        check_finite(a.data(), "map matrix")?;
        check_finite(b, "map offset")?;
        if let Some(s) = map.scaling() {
            check_len(n, s.direction.len())?;
            if !(s.min_value() > 0.0) {
                return Err(invalid(
                    "scaling",
                    format!("minimum {} is not bounded away from zero", s.min_value()),
                ));
            }
        }
        if noise.nu.len() != d || noise.nu_tilde.len() != d {
            return Err(ScviError::ShapeMismatch("noise model block count".into()));
        }
        if noise
            .nu
            .iter()
            .chain(&noise.nu_tilde)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invalid("noise", "standard deviations must be finite and nonnegative"));
        }
        constants.validate(d)?;
        if let MonotonicityClass::StronglyPseudoMonotone { mu } = class {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(invalid("mu", format!("{mu} is not positive")));
            }
        }
        Ok(Self {
            name: name.into(),
            seed,
            layout,
            geometries,
            map,
            noise,
            class,
            known_solution: None,
            objective: None,
            constants,
        })
    }

    pub fn with_known_solution(mut self, x: Vec<f64>) -> Result<Self> {
        let v = BlockVector::from_flat(self.layout.clone(), x)?;
        if !self.contains(&v, 1e-9) {
            return Err(invalid("known_solution", "not feasible"));
        }
        self.known_solution = Some(v);
        Ok(self)
    }

    pub fn with_objective(mut self, objective: QuadraticObjective) -> Result<Self> {
        let n = self.dim();
        if objective.q.rows() != n || objective.q.cols() != n {
            return Err(ScviError::ShapeMismatch("objective matrix".into()));
        }
        check_len(n, objective.c.len())?;
        self.objective = Some(objective);
        Ok(self)
    }

    /// Same instance with the oracle noise switched off.
    pub fn without_noise(&self) -> Self {
        let mut p = self.clone();
        let d = self.num_blocks();
        p.noise = NoiseModel::uniform(d, 0.0);
        p.constants.nu = vec![0.0; d];
        p.constants.nu_tilde = vec![0.0; d];
        p
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Result<Self> {
        constants.validate(self.num_blocks())?;
        self.constants = constants;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn geometries(&self) -> &[BlockGeometry] {
        &self.geometries
    }

    pub fn geometry(&self, i: usize) -> &BlockGeometry {
        &self.geometries[i]
    }

    pub fn map(&self) -> &MapModel {
        &self.map
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn class(&self) -> MonotonicityClass {
        self.class
    }

    pub fn known_solution(&self) -> Option<&BlockVector> {
        self.known_solution.as_ref()
    }

    pub fn objective(&self) -> Option<&QuadraticObjective> {
        self.objective.as_ref()
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn zeros(&self) -> BlockVector {
        BlockVector::zeros(self.layout.clone())
    }

    pub fn vector(&self, data: Vec<f64>) -> Result<BlockVector> {
        BlockVector::from_flat(self.layout.clone(), data)
    }

    pub fn contains(&self, x: &BlockVector, tol: f64) -> bool {
        x.dim() == self.dim()
            && self
                .geometries
                .iter()
                .enumerate()
                .all(|(i, g)| g.contains(x.block(i), tol))
    }

    /// Center of every component set.
    pub fn center(&self) -> BlockVector {
        let data = self.geometries.iter().flat_map(|g| g.set.center()).collect();
        BlockVector::from_flat(self.layout.clone(), data).expect("layout matches geometries")
    }

    /// Uniform feasible sample (entropy blocks pulled into the working interior).
    pub fn sample_point(&self, stream: &mut NoiseStream) -> BlockVector {
        let data = self
            .geometries
            .iter()
            .flat_map(|g| g.sample_point(stream.rng()))
            .collect();
        BlockVector::from_flat(self.layout.clone(), data).expect("layout matches geometries")
    }

    /// `F(x)`.
    pub fn expected_map(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check_point(x)?;
        let v = self.map.eval(x.as_slice());
        check_finite(&v, "mapping value")?;
        BlockVector::from_flat(self.layout.clone(), v)
    }

    /// `F_i(x)` written into `out`.
    pub fn expected_block_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.map.eval_rows_into(self.layout.range(i), x, out);
    }

    /// `F(x, xi) = F(x) + w` with Gaussian `w`; block `i` has `E||w_i||_2^2 = nu_i^2`.
    pub fn sample_map(&self, x: &BlockVector, stream: &mut NoiseStream, draw: Draw) -> Result<BlockVector> {
        let mut v = self.expected_map(x)?;
        for i in 0..self.num_blocks() {
            self.add_noise(i, v.block_mut(i), stream, draw);
        }
        Ok(v)
    }

    /// `F_i(x, xi)` into `out`; only the noise of block `i` is drawn.
    pub fn sample_block_into(
        &self,
        i: usize,
        x: &[f64],
        stream: &mut NoiseStream,
        draw: Draw,
        out: &mut [f64],
    ) -> Result<()> {
        self.expected_block_into(i, x, out);
        self.add_noise(i, out, stream, draw);
        check_finite(out, "mapping value")
    }

    fn add_noise(&self, i: usize, out: &mut [f64], stream: &mut NoiseStream, draw: Draw) {
        let std = self.noise.std(draw, i);
        if std == 0.0 {
            return;
        }
        let per = std / (out.len() as f64).sqrt();
        for o in out.iter_mut() {
            *o += per * stream.standard_normal();
        }
    }

    fn check_point(&self, x: &BlockVector) -> Result<()> {
        check_len(self.dim(), x.dim())?;
        if x.layout().sizes() != self.layout.sizes() {
            return Err(ScviError::ShapeMismatch(format!(
                "block sizes {:?} vs {:?}",
                x.layout().sizes(),
                self.layout.sizes()
            )));
        }
        check_finite(x.as_slice(), "point")
    }

    /// Composite norm `sqrt(sum_i ||x^i||_i^2)`.
    pub fn norm(&self, x: &BlockVector) -> f64 {
        self.geometries
            .iter()
            .enumerate()
            .map(|(i, g)| g.norm(x.block(i)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `f(x) - f*` for optimization instances.
    pub fn objective_gap(&self, x: &BlockVector) -> Result<f64> {
        let obj = self
            .objective
            .as_ref()
            .ok_or_else(|| ScviError::NotApplicable("instance has no objective".into()))?;
        self.check_point(x)?;
        Ok(obj.value(x.as_slice()) - obj.optimal_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ComponentSet;

    fn one_dim(a: f64, b: f64, nu: f64) -> ScviProblem {
        let geoms = vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())];
        let layout = BlockLayout::new(vec![1]).unwrap();
        let map = MapModel::Affine {
            matrix: Matrix::new(1, 1, vec![a]).unwrap(),
            offset: vec![b],
        };
        let noise = NoiseModel::uniform(1, nu);
        let constants = ProblemConstants::analytic(&geoms, &layout, &map, &noise, Some(a));
        ScviProblem::new(
            "test",
            0,
            geoms,
            map,
            noise,
            MonotonicityClass::StronglyPseudoMonotone { mu: a },
            constants,
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_sample_is_expected_map() {
        let p = one_dim(2.0, -0.6, 0.0);
        let x = p.vector(vec![0.7]).unwrap();
        let mut s = NoiseStream::from_seed(1);
        let f = p.expected_map(&x).unwrap();
        assert!((f.as_slice()[0] - 0.8).abs() < 1e-15);
        assert_eq!(p.sample_map(&x, &mut s, Draw::Update).unwrap(), f);
    }

    #[test]
    fn analytic_constants_one_dim() {
        let p = one_dim(2.0, -0.6, 0.1);
        let c = p.constants();
        assert_eq!(c.bounds, vec![1.0]);
        assert!((c.map_bounds[0] - 2.6).abs() < 1e-12);
        assert!((c.lipschitz[0] - 2.0).abs() < 1e-12);
        assert_eq!(c.nu, vec![0.1]);
    }

    #[test]
    fn shape_errors() {
        let p = one_dim(2.0, -0.6, 0.0);
        let bad = BlockVector::from_blocks(vec![vec![0.0, 0.0]]).unwrap();
        assert!(p.expected_map(&bad).is_err());
        assert!(p.clone().with_known_solution(vec![3.0]).is_err());
    }

    #[test]
    fn scaled_jacobian_matches_finite_differences() {
        let map = MapModel::ScaledAffine {
            matrix: Matrix::new(2, 2, vec![1.0, 0.5, -0.5, 2.0]).unwrap(),
            offset: vec![0.1, -0.2],
            scaling: Scaling::default_for(2),
        };
        let x = [0.3, -0.7];
        let v = [0.4, 1.1];
        let jt = map.jacobian_tr_mul(&x, &v);
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (dot(&map.eval(&xp), &v) - dot(&map.eval(&xm), &v)) / (2.0 * h);
            assert!((fd - jt[j]).abs() < 1e-8);
        }
    }
}
