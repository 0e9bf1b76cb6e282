use crate::block::{norm2, BlockVector};
use crate::error::{Result, ScviError};
use crate::geometry::Norm;
use crate::problem::ScviProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: BlockVector,
    /// Natural residual at `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// `||x - Proj_X(x - F(x))||_2`, zero exactly at solutions.
pub fn natural_residual(problem: &ScviProblem, x: &BlockVector) -> Result<f64> {
    let f = problem.expected_map(x)?;
    let mut sq = 0.0;
    for (i, g) in problem.geometries().iter().enumerate() {
        let shifted: Vec<f64> = x.block(i).iter().zip(f.block(i)).map(|(a, b)| a - b).collect();
        let p = g.set.project(&shifted)?;
        sq += x
            .block(i)
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(sq.sqrt())
}

/// Deterministic full-block mirror-prox with `gamma = 1/(2L)`, stopped once the natural
/// residual reaches `tol`.
pub fn solve_deterministic(
    problem: &ScviProblem,
    start: &BlockVector,
    tol: f64,
    max_iterations: usize,
) -> Result<ReferenceSolution> {
    let radius = problem
        .geometries()
        .iter()
        .map(|g| g.set.bound(Norm::L2).powi(2))
        .sum::<f64>()
        .sqrt();
    let l = problem.map().euclidean_lipschitz(radius);
    let gamma = if l > 0.0 { 0.5 / l } else { 1.0 };
    let mut x = problem.vector(start.as_slice().to_vec())?;
    let mut y = x.clone();
    for it in 0..=max_iterations {
        let residual = natural_residual(problem, &x)?;
        if residual <= tol {
            return Ok(ReferenceSolution {
                x,
                residual,
                iterations: it,
            });
        }
        if it == max_iterations {
            return Err(ScviError::NoConvergence {
                residual,
                iterations: it,
            });
        }
        let fx = problem.expected_map(&x)?;
        for (i, g) in problem.geometries().iter().enumerate() {
            let step: Vec<f64> = fx.block(i).iter().map(|v| gamma * v).collect();
            g.prox_map_into(x.block(i), &step, y.block_mut(i))?;
        }
        let fy = problem.expected_map(&y)?;
        for (i, g) in problem.geometries().iter().enumerate() {
            let step: Vec<f64> = fy.block(i).iter().map(|v| gamma * v).collect();
            let anchor = x.block(i).to_vec();
            g.prox_map_into(&anchor, &step, x.block_mut(i))?;
        }
        if !(norm2(x.as_slice()).is_finite()) {
            return Err(ScviError::NonFinite("reference iterate"));
        }
    }
    unreachable!("loop returns at max_iterations")
}
