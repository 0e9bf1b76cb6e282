//! Randomized block stochastic mirror-prox (B-SMP), full-block stochastic mirror-prox
//! with weighted averaging (SMP), stepsize schedules and the averaging recursion.

mod bsmp;
mod reference;
mod smp;

use serde::{Deserialize, Serialize};

use crate::block::BlockVector;
use crate::error::{check_len, invalid, Result, ScviError};
use crate::problem::ScviProblem;
use crate::rng::NoiseStream;

pub use bsmp::{bsmp_step, run_bsmp, run_bsmp_observed};
pub use reference::{natural_residual, solve_deterministic, ReferenceSolution};
pub use smp::{run_smp, run_smp_observed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    /// `gamma_0` at `k = 0`, then `gamma_0 / k`.
    Harmonic { gamma0: f64 },
    /// `gamma_0 / sqrt(k + 1)`.
    InverseSqrt { gamma0: f64 },
    Constant { gamma: f64 },
}

impl StepsizeSchedule {
    pub fn gamma(&self, k: usize) -> f64 {
        match *self {
            StepsizeSchedule::Harmonic { gamma0 } => {
                if k == 0 {
                    gamma0
                } else {
                    gamma0 / k as f64
                }
            }
            StepsizeSchedule::InverseSqrt { gamma0 } => gamma0 / ((k + 1) as f64).sqrt(),
            StepsizeSchedule::Constant { gamma } => gamma,
        }
    }

    pub fn initial(&self) -> f64 {
        self.gamma(0)
    }

    /// Square summable and non-summable.
    pub fn is_square_summable_divergent(&self) -> bool {
        matches!(self, StepsizeSchedule::Harmonic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.initial();
        if !(g.is_finite() && g > 0.0) {
            return Err(invalid("stepsize", format!("{g} is not a positive stepsize")));
        }
        Ok(())
    }
}

/// Which prescription to use for the initial stepsize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gamma0Rule {
    /// `gamma_0 = d max_i L_omega_i / mu` for the harmonic schedule.
    StronglyPseudoMonotone,
    /// `gamma_0 = gamma sqrt(d)` for the averaged inverse-square-root schedule.
    Convex { gamma: f64 },
}

pub fn auto_gamma0(problem: &ScviProblem, rule: Gamma0Rule) -> Result<f64> {
    let d = problem.num_blocks() as f64;
    match rule {
        Gamma0Rule::StronglyPseudoMonotone => {
            let mu = problem
                .constants()
                .mu
                .ok_or(ScviError::MissingConstant("mu"))?;
            let l_omega = problem
                .geometries()
                .iter()
                .map(|g| g.l_omega)
                .fold(0.0, f64::max);
            Ok(d * l_omega / mu)
        }
        Gamma0Rule::Convex { gamma } => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(invalid("gamma", format!("{gamma} is not positive")));
            }
            Ok(gamma * d.sqrt())
        }
    }
}

/// Strongly pseudo-monotone rule evaluated from raw inputs.
pub fn gamma0_strong(blocks: usize, max_l_omega: f64, mu: f64) -> f64 {
    blocks as f64 * max_l_omega / mu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPoint {
    Center,
    /// Uniform feasible sample from the run's initialisation stream.
    Random,
    Given { x: Vec<Vec<f64>> },
}

impl Default for InitialPoint {
    fn default() -> Self {
        InitialPoint::Center
    }
}

impl InitialPoint {
    pub fn resolve(&self, problem: &ScviProblem, stream: &mut NoiseStream) -> Result<BlockVector> {
        let x = match self {
            InitialPoint::Center => problem.center(),
            InitialPoint::Random => problem.sample_point(stream),
            InitialPoint::Given { x } => {
                let v = BlockVector::from_blocks(x.clone())?;
                if v.layout().sizes() != problem.layout().sizes() {
                    return Err(ScviError::ShapeMismatch("initial point block sizes".into()));
                }
                problem.vector(v.into_flat())?
            }
        };
        if !problem.contains(&x, 1e-9) {
            return Err(invalid("initial_point", "not feasible"));
        }
        Ok(x)
    }
}

/// Iterations at which the trace records a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoints {
    /// `{0, K} ∪ {1, 2, 4, 8, ...} ∪ {multiples of ceil(K/20)}`.
    #[default]
    Default,
    Explicit { ks: Vec<usize> },
}

impl Checkpoints {
    pub fn resolve(&self, iterations: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = match self {
            Checkpoints::Default => {
                let mut v = vec![0, iterations];
                let mut p = 1;
                while p <= iterations {
                    v.push(p);
                    p *= 2;
                }
                let step = iterations.div_ceil(20).max(1);
                v.extend((step..=iterations).step_by(step));
                v
            }
            Checkpoints::Explicit { ks } => ks.iter().copied().filter(|&k| k <= iterations).collect(),
        };
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsmpConfig {
    pub schedule: StepsizeSchedule,
    /// Block distribution `p`; uniform when absent.
    #[serde(default)]
    pub block_probs: Option<Vec<f64>>,
    /// Averaging exponent `r < 1`; no averaging when absent.
    #[serde(default)]
    pub averaging: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
    #[serde(default)]
    pub initial: InitialPoint,
    #[serde(default)]
    pub checkpoints: Checkpoints,
}

impl BsmpConfig {
    pub fn new(schedule: StepsizeSchedule, iterations: usize, seed: u64) -> Self {
        Self {
            schedule,
            block_probs: None,
            averaging: None,
            iterations,
            seed,
            replication: 0,
            initial: InitialPoint::Center,
            checkpoints: Checkpoints::Default,
        }
    }

    pub fn probabilities(&self, blocks: usize) -> Result<Vec<f64>> {
        match &self.block_probs {
            None => Ok(vec![1.0 / blocks as f64; blocks]),
            Some(p) => {
                validate_probabilities(p, blocks)?;
                Ok(p.clone())
            }
        }
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        self.schedule.validate()?;
        self.probabilities(blocks)?;
        if let Some(r) = self.averaging {
            validate_exponent(r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmpConfig {
    pub schedule: StepsizeSchedule,
    /// Averaging exponent `r < 1`.
    pub r: f64,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
    #[serde(default)]
    pub initial: InitialPoint,
    #[serde(default)]
    pub checkpoints: Checkpoints,
}

impl SmpConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        validate_exponent(self.r)
    }
}

pub fn validate_probabilities(p: &[f64], blocks: usize) -> Result<()> {
    check_len(blocks, p.len())?;
    if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("block_probs", "every probability must be positive"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid("block_probs", format!("probabilities sum to {s}")));
    }
    Ok(())
}

pub fn validate_exponent(r: f64) -> Result<()> {
    if !(r.is_finite() && r < 1.0) {
        return Err(invalid("r", format!("averaging exponent {r} must be finite and below 1")));
    }
    Ok(())
}

/// One step of the weighted averaging recursion:
/// `S' = S + gamma^r`, `avg' = (S avg + gamma^r x) / S'`.
pub fn weighted_average_update(
    weight_sum: f64,
    average: &BlockVector,
    x_next: &BlockVector,
    gamma_next: f64,
    r: f64,
) -> Result<(f64, BlockVector)> {
    average.ensure_shape(x_next)?;
    let mut avg = average.clone();
    let s = average_into(weight_sum, avg.as_mut_slice(), x_next.as_slice(), gamma_next.powf(r));
    Ok((s, avg))
}

pub(crate) fn average_into(weight_sum: f64, avg: &mut [f64], x: &[f64], weight: f64) -> f64 {
    let next = weight_sum + weight;
    for (a, v) in avg.iter_mut().zip(x) {
        *a = (weight_sum * *a + weight * v) / next;
    }
    next
}

/// Running sums over the steps that entered the average up to a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSums {
    /// `sum gamma_t^r` (the normaliser `S_k` or `Gamma_k`).
    pub weight_sum: f64,
    /// `sum gamma_t^(r+1)` over the same steps.
    pub step_power_sum: f64,
    /// The last stepsize in the sums.
    pub last_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub x: BlockVector,
    /// `x_bar_k` (B-SMP) or `y_bar_k` (SMP).
    pub average: Option<BlockVector>,
    pub sums: Option<StepSums>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum SolverConfig {
    Bsmp(BsmpConfig),
    Smp(SmpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: SolverConfig,
    pub checkpoints: Vec<Checkpoint>,
    /// How often each block was selected.
    pub block_counts: Vec<u64>,
    pub wall_clock_secs: f64,
}

impl RunTrace {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trace always holds a checkpoint")
    }
}

/// Per-iteration callback; receives `x_k` for every `k` including 0.
pub trait IterateObserver {
    fn observe(&mut self, k: usize, x: &BlockVector);
}

impl<F: FnMut(usize, &BlockVector)> IterateObserver for F {
    fn observe(&mut self, k: usize, x: &BlockVector) {
        self(k, x)
    }
}

pub(crate) struct NoObserver;

impl IterateObserver for NoObserver {
    fn observe(&mut self, _: usize, _: &BlockVector) {}
}

/// Aborts when an iterate leaves `10^3 max B_i`, which correct projections never allow.
pub(crate) struct DivergenceGuard {
    limit: f64,
}

impl DivergenceGuard {
    pub(crate) fn new(problem: &ScviProblem) -> Self {
        let b = problem.constants().bounds.iter().cloned().fold(0.0, f64::max);
        Self { limit: 1e3 * b.max(f64::MIN_POSITIVE) }
    }

    pub(crate) fn check(&self, problem: &ScviProblem, k: usize, x: &BlockVector) -> Result<()> {
        let norm = problem.norm(x);
        if !(norm <= self.limit) {
            return Err(ScviError::Diverged {
                iteration: k,
                norm,
                guard: self.limit,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BlockGeometry, ComponentSet};
    use crate::linalg::Matrix;
    use crate::problem::{affine_with_solution, MonotonicityClass, NoiseModel};

    fn with_blocks(d: usize, mu: f64) -> ScviProblem {
        let geoms = (0..d)
            .map(|_| BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap()))
            .collect();
        let mut a = Matrix::identity(d);
        for i in 0..d {
            a[(i, i)] = mu;
        }
        affine_with_solution(
            "t",
            0,
            geoms,
            a,
            vec![0.0; d],
            NoiseModel::uniform(d, 0.0),
            MonotonicityClass::StronglyPseudoMonotone { mu },
        )
        .unwrap()
    }

    #[test]
    fn auto_gamma0_examples() {
        let p = with_blocks(8, 0.5);
        assert_eq!(auto_gamma0(&p, Gamma0Rule::StronglyPseudoMonotone).unwrap(), 16.0);
        let p = with_blocks(1, 1.0);
        assert_eq!(auto_gamma0(&p, Gamma0Rule::StronglyPseudoMonotone).unwrap(), 1.0);
        let p = with_blocks(9, 1.0);
        assert_eq!(auto_gamma0(&p, Gamma0Rule::Convex { gamma: 2.0 }).unwrap(), 6.0);
        assert_eq!(gamma0_strong(8, 1.0, 0.5), 16.0);
    }

    #[test]
    fn missing_mu_is_an_error() {
        let geoms = vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())];
        let p = affine_with_solution(
            "t",
            0,
            geoms,
            Matrix::new(1, 1, vec![0.0]).unwrap(),
            vec![0.0],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::Monotone,
        )
        .unwrap();
        assert!(matches!(
            auto_gamma0(&p, Gamma0Rule::StronglyPseudoMonotone),
            Err(ScviError::MissingConstant("mu"))
        ));
    }

    #[test]
    fn schedules() {
        let h = StepsizeSchedule::Harmonic { gamma0: 4.0 };
        assert_eq!([h.gamma(0), h.gamma(1), h.gamma(4)], [4.0, 4.0, 1.0]);
        let s = StepsizeSchedule::InverseSqrt { gamma0: 2.0 };
        assert_eq!(s.gamma(3), 1.0);
        assert!(StepsizeSchedule::Constant { gamma: 0.0 }.validate().is_err());
    }

    #[test]
    fn default_checkpoints() {
        let ks = Checkpoints::Default.resolve(40);
        assert_eq!(ks, vec![0, 1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32, 34, 36, 38, 40]);
        assert_eq!(Checkpoints::Default.resolve(0), vec![0]);
        let e = Checkpoints::Explicit { ks: vec![5, 1, 5, 100] };
        assert_eq!(e.resolve(10), vec![1, 5]);
    }

    #[test]
    fn averaging_examples() {
        let x0 = BlockVector::from_blocks(vec![vec![1.0, 3.0]]).unwrap();
        let x1 = BlockVector::from_blocks(vec![vec![3.0, 5.0]]).unwrap();
        let (s, avg) = weighted_average_update(1.0, &x0, &x1, 0.5, 0.0).unwrap();
        assert_eq!(s, 2.0);
        assert_eq!(avg.as_slice(), &[2.0, 4.0]);
        let bad = BlockVector::from_blocks(vec![vec![1.0]]).unwrap();
        assert!(weighted_average_update(1.0, &x0, &bad, 0.5, 0.0).is_err());
    }

    #[test]
    fn probability_validation() {
        assert!(validate_probabilities(&[0.5, 0.5], 2).is_ok());
        assert!(validate_probabilities(&[1.0, 0.0], 2).is_err());
        assert!(validate_probabilities(&[0.5, 0.6], 2).is_err());
        assert!(validate_probabilities(&[1.0], 2).is_err());
        assert!(validate_exponent(1.0).is_err());
        assert!(validate_exponent(0.99).is_ok());
    }
}
