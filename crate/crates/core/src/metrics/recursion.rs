use serde::{Deserialize, Serialize};

use super::{lyapunov, theta};
use crate::block::{dot, BlockVector};
use crate::error::{invalid, Result};
use crate::problem::ScviProblem;
use crate::rng::NoiseStream;
use crate::solvers::{bsmp_step, validate_probabilities};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepReport {
    /// `sum_i p_i L(x_{k+1}^{(i)}, x)`: the post-step Lyapunov value averaged over blocks.
    pub expected_next: f64,
    /// `L(x_k, x)`.
    pub current: f64,
    /// `<F(x_k), x - x_k>`.
    pub inner: f64,
    pub theta: f64,
    /// `L(x_k, x) + gamma <F(x_k), x - x_k> + theta gamma^2`.
    pub rhs: f64,
    pub holds: bool,
}

/// Enumerates every block choice of one noiseless B-SMP step from `x_k` and compares the
/// averaged Lyapunov value against its one-step upper bound at the reference point `x`.
/// `theta` is built from the problem's declared constants with the noise levels zeroed.
pub fn one_step_recursion(
    problem: &ScviProblem,
    x_k: &BlockVector,
    x: &BlockVector,
    gamma: f64,
    probs: &[f64],
) -> Result<OneStepReport> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid("gamma", format!("{gamma} is not nonnegative")));
    }
    validate_probabilities(probs, problem.num_blocks())?;
    let clean = problem.without_noise();
    let geoms = clean.geometries();
    // noiseless draws never consume randomness, any stream will do
    let mut s1 = NoiseStream::new(0, 0);
    let mut s2 = NoiseStream::new(0, 1);
    let mut expected_next = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        let next = bsmp_step(&clean, x_k, gamma, i, &mut s1, &mut s2)?;
        expected_next += p * lyapunov(probs, geoms, &next, x)?;
    }
    let current = lyapunov(probs, geoms, x_k, x)?;
    let f = clean.expected_map(x_k)?;
    let diff: Vec<f64> = x.as_slice().iter().zip(x_k.as_slice()).map(|(a, b)| a - b).collect();
    let inner = dot(f.as_slice(), &diff);
    let th = theta(clean.constants(), geoms);
    let rhs = current + gamma * inner + th * gamma * gamma;
    Ok(OneStepReport {
        expected_next,
        current,
        inner,
        theta: th,
        rhs,
        holds: expected_next <= rhs + 1e-10 * rhs.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_strongly_monotone_affine, SetKind, StronglyMonotoneParams};

    #[test]
    fn holds_on_random_iterates() {
        let p = make_strongly_monotone_affine(&StronglyMonotoneParams {
            blocks: 3,
            block_size: 2,
            mu: 0.5,
            l_bound: 2.0,
            noise: 0.3,
            set: SetKind::Box { half_width: 1.0 },
            seed: 9,
        })
        .unwrap();
        let x_star = p.known_solution().unwrap().clone();
        let mut s = NoiseStream::new(1, 0);
        let probs = vec![1.0 / 3.0; 3];
        for gamma in [0.01, 0.1, 1.0] {
            for _ in 0..10 {
                let x = p.sample_point(&mut s);
                let r = one_step_recursion(&p, &x, &x_star, gamma, &probs).unwrap();
                assert!(r.holds, "{r:?}");
                assert!(r.inner <= 0.0);
            }
        }
    }
}
