//! Error functionals, theoretical rate constants and bounds, rate fitting and
//! verifiers for the auxiliary inequalities behind the rates.

mod gap;
mod lemmas;
mod recursion;

use serde::{Deserialize, Serialize};

use crate::block::BlockVector;
use crate::error::{check_len, invalid, Result, ScviError};
use crate::geometry::BlockGeometry;
use crate::problem::ProblemConstants;
use crate::solvers::StepSums;

pub use gap::{default_gap_method, gap_estimate, gap_function, GapEstimate, GapMethod};
pub use lemmas::{
    stepsize_sum_threshold, verify_recursion_lemma, verify_stepsize_sums, RecursionReport,
    StepsizeSumReport, SumStatus,
};
pub use recursion::{one_step_recursion, OneStepReport};

fn check_blocks(geoms: &[BlockGeometry], x: &BlockVector, y: &BlockVector) -> Result<()> {
    x.ensure_shape(y)?;
    check_len(geoms.len(), x.num_blocks())?;
    for (i, g) in geoms.iter().enumerate() {
        check_len(g.dim(), x.block(i).len())?;
    }
    Ok(())
}

/// `sum_i p_i^{-1} D_i(x^i, y^i)`.
pub fn lyapunov(p: &[f64], geoms: &[BlockGeometry], x: &BlockVector, y: &BlockVector) -> Result<f64> {
    check_blocks(geoms, x, y)?;
    check_len(geoms.len(), p.len())?;
    let mut total = 0.0;
    for (i, g) in geoms.iter().enumerate() {
        if !(p[i] > 0.0) {
            return Err(invalid("p", "probabilities must be positive"));
        }
        total += g.bregman_distance(x.block(i), y.block(i))? / p[i];
    }
    Ok(total)
}

/// Squared composite norm `sum_i ||x^i - y^i||_i^2`.
pub fn mse(geoms: &[BlockGeometry], x: &BlockVector, y: &BlockVector) -> Result<f64> {
    check_blocks(geoms, x, y)?;
    Ok(geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let diff: Vec<f64> = x.block(i).iter().zip(y.block(i)).map(|(a, b)| a - b).collect();
            g.norm(&diff).powi(2)
        })
        .sum())
}

/// Stepsize parameters entering the rate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    /// Averaging exponent.
    pub r: f64,
    /// Free factor of `gamma_0 = gamma sqrt(d)` in the averaged optimization rate.
    pub gamma: f64,
    /// Initial stepsize of the inverse-square-root schedule in the gap rate.
    pub gamma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    /// `sum_i (C_i^2 + nu_i^2)/mu_omega_i + 2 L_i B_i (C_i + nu~_i)`.
    pub theta: f64,
    /// MSE constant under strong pseudo-monotonicity; needs `mu`.
    pub mse_constant: Option<f64>,
    /// Averaged objective-gap constant.
    pub objective_constant: f64,
    /// `sum_i (2/mu_omega_i)(2 C_i^2 + nu~_i^2 + 1.25 nu_i^2)`.
    pub gap_noise: f64,
    /// Averaged gap-function constant.
    pub gap_constant: f64,
}

fn theta(c: &ProblemConstants, geoms: &[BlockGeometry]) -> f64 {
    geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            (c.map_bounds[i].powi(2) + c.nu[i].powi(2)) / g.mu_omega
                + 2.0 * c.lipschitz[i] * c.bounds[i] * (c.map_bounds[i] + c.nu_tilde[i])
        })
        .sum()
}

fn gap_noise(c: &ProblemConstants, geoms: &[BlockGeometry]) -> f64 {
    geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            (2.0 / g.mu_omega)
                * (2.0 * c.map_bounds[i].powi(2) + c.nu_tilde[i].powi(2) + 1.25 * c.nu[i].powi(2))
        })
        .sum()
}

/// `sum_i w_i L_omega_i B_i^2` with weights `w_i`.
fn weighted_spread(c: &ProblemConstants, geoms: &[BlockGeometry], w: impl Fn(usize) -> f64) -> f64 {
    geoms
        .iter()
        .enumerate()
        .map(|(i, g)| w(i) * g.l_omega * c.bounds[i].powi(2))
        .sum()
}

pub fn rate_constants(
    constants: &ProblemConstants,
    geoms: &[BlockGeometry],
    inputs: RateInputs,
) -> Result<RateConstants> {
    check_len(geoms.len(), constants.num_blocks())?;
    let RateInputs { r, gamma, gamma0 } = inputs;
    if !(r.is_finite() && r < 1.0) {
        return Err(invalid("r", format!("{r} must be below 1")));
    }
    for (name, v) in [("gamma", gamma), ("gamma0", gamma0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, format!("{v} is not positive")));
        }
    }
    let th = theta(constants, geoms);
    let max_l = geoms.iter().map(|g| g.l_omega).fold(0.0, f64::max);
    let min_mu = geoms.iter().map(|g| g.mu_omega).fold(f64::INFINITY, f64::min);
    let mse_constant = constants
        .mu
        .map(|mu| 4.0 * th * max_l * max_l / (mu * mu * min_mu));
    let prefactor = (2.0 - r) * 2f64.powf(1.0 - 0.5 * r);
    let spread = weighted_spread(constants, geoms, |_| 1.0);
    let objective_constant = prefactor * (2.0 * spread / gamma + gamma * th / (1.0 - r));
    let cg = gap_noise(constants, geoms);
    let gap_constant = prefactor * (4.0 * spread / gamma0 + gamma0 * cg / (1.0 - r));
    Ok(RateConstants {
        theta: th,
        mse_constant,
        objective_constant,
        gap_noise: cg,
        gap_constant,
    })
}

/// `A d / k`: the MSE bound of the harmonic B-SMP schedule at iteration `k >= 2`.
pub fn mse_bound(rates: &RateConstants, blocks: usize, k: usize) -> Result<f64> {
    let a = rates.mse_constant.ok_or(ScviError::MissingConstant("mu"))?;
    if k < 2 {
        return Err(invalid("k", "the MSE bound holds for k >= 2"));
    }
    Ok(a * blocks as f64 / k as f64)
}

/// Explicit bound on `E f(x_bar_K) - f*` for averaged B-SMP, from the traced sums
/// `S_K = sum_{k<=K} gamma_k^r`, `sum_{k<=K} gamma_k^{r+1}` and `gamma_K`.
pub fn averaged_objective_bound(
    constants: &ProblemConstants,
    geoms: &[BlockGeometry],
    p: &[f64],
    r: f64,
    sums: &StepSums,
) -> Result<f64> {
    check_len(geoms.len(), p.len())?;
    let spread = weighted_spread(constants, geoms, |i| 1.0 / p[i]);
    let th = theta(constants, geoms);
    Ok((2.0 * sums.last_gamma.powf(r - 1.0) * spread + th * sums.step_power_sum) / sums.weight_sum)
}

/// Explicit bound on `E G(y_bar_K)` for SMP, from `sum_{k<K} gamma_k^r`,
/// `sum_{k<K} gamma_k^{r+1}` and `gamma_{K-1}`.
pub fn averaged_gap_bound(
    constants: &ProblemConstants,
    geoms: &[BlockGeometry],
    r: f64,
    sums: &StepSums,
) -> Result<f64> {
    check_len(geoms.len(), constants.num_blocks())?;
    let spread = weighted_spread(constants, geoms, |_| 1.0);
    let cg = gap_noise(constants, geoms);
    Ok((4.0 * sums.last_gamma.powf(r - 1.0) * spread + cg * sums.step_power_sum) / sums.weight_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `log value` against `log k` over points with `k >= k_min`.
pub fn fit_rate(points: &[(f64, f64)], k_min: f64) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|(k, _)| *k >= k_min).collect();
    if used.len() < 5 {
        return Err(invalid(
            "points",
            format!("{} checkpoints with k >= {k_min}; need at least 5", used.len()),
        ));
    }
    if let Some((k, v)) = used.iter().find(|(k, v)| !(*v > 0.0) || !(*k > 0.0) || !v.is_finite()) {
        return Err(invalid("points", format!("nonpositive value {v} at k = {k}")));
    }
    let n = used.len() as f64;
    let lx: Vec<f64> = used.iter().map(|(k, _)| k.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|(_, v)| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(invalid("points", "all checkpoints share the same k"));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        points: used.len(),
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ComponentSet;
    use crate::problem::ConstantSource;

    fn unit_constants() -> ProblemConstants {
        ProblemConstants {
            bounds: vec![1.0],
            map_bounds: vec![1.0],
            lipschitz: vec![1.0],
            nu: vec![1.0],
            nu_tilde: vec![1.0],
            mu: Some(1.0),
            source: ConstantSource::Analytic,
        }
    }

    fn unit_geom() -> Vec<BlockGeometry> {
        vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())]
    }

    #[test]
    fn unit_rate_constants() {
        let rc = rate_constants(
            &unit_constants(),
            &unit_geom(),
            RateInputs { r: 0.0, gamma: 1.0, gamma0: 1.0 },
        )
        .unwrap();
        assert_eq!(rc.theta, 6.0);
        assert_eq!(rc.mse_constant, Some(24.0));
        assert_eq!(rc.gap_noise, 8.5);
        // (2 - 0) 2^1 (2 + 6) and (2 - 0) 2^1 (4 + 8.5)
        assert_eq!(rc.objective_constant, 32.0);
        assert_eq!(rc.gap_constant, 50.0);
        assert!(rate_constants(
            &unit_constants(),
            &unit_geom(),
            RateInputs { r: 1.0, gamma: 1.0, gamma0: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let g = vec![
            BlockGeometry::euclidean(ComponentSet::cube(1, -2.0, 2.0).unwrap()),
            BlockGeometry::euclidean(ComponentSet::cube(1, -2.0, 2.0).unwrap()),
        ];
        let x = BlockVector::from_blocks(vec![vec![1.0], vec![0.0]]).unwrap();
        let y = BlockVector::from_blocks(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(lyapunov(&[0.5, 0.5], &g, &x, &x).unwrap(), 0.0);
        assert_eq!(lyapunov(&[0.5, 0.5], &g, &x, &y).unwrap(), 2.0);
        assert_eq!(mse(&g, &x, &y).unwrap(), 2.0);
        let bad = BlockVector::from_blocks(vec![vec![1.0, 0.0]]).unwrap();
        assert!(lyapunov(&[0.5, 0.5], &g, &x, &bad).is_err());
    }

    #[test]
    fn mse_is_squared_l1_on_entropy_blocks() {
        let g = vec![BlockGeometry::entropy_simplex(2).unwrap()];
        let x = BlockVector::from_blocks(vec![vec![0.25, 0.75]]).unwrap();
        let y = BlockVector::from_blocks(vec![vec![0.75, 0.25]]).unwrap();
        assert_eq!(mse(&g, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn exact_fits() {
        let inv: Vec<(f64, f64)> = (1..=10).map(|j| (10f64 * j as f64, 3.0 / (10.0 * j as f64))).collect();
        assert!((fit_rate(&inv, 0.0).unwrap().slope + 1.0).abs() < 1e-9);
        let sq: Vec<(f64, f64)> = (1..=10).map(|j| (j as f64, 2.0 / (j as f64).sqrt())).collect();
        assert!((fit_rate(&sq, 0.0).unwrap().slope + 0.5).abs() < 1e-9);
        assert!(fit_rate(&sq[..4], 0.0).is_err());
        let mut bad = sq.clone();
        bad[6].1 = 0.0;
        assert!(fit_rate(&bad, 0.0).is_err());
    }

    #[test]
    fn averaged_bounds_match_hand_values() {
        let sums = StepSums {
            weight_sum: 2.0,
            step_power_sum: 3.0,
            last_gamma: 0.5,
        };
        let obj = averaged_objective_bound(&unit_constants(), &unit_geom(), &[1.0], 0.0, &sums).unwrap();
        // (2 * 0.5^-1 * 1 + 6 * 3) / 2
        assert_eq!(obj, 11.0);
        let gap = averaged_gap_bound(&unit_constants(), &unit_geom(), 0.0, &sums).unwrap();
        // (4 * 2 + 8.5 * 3) / 2
        assert_eq!(gap, 16.75);
    }
}
