//! The gap function `G(x) = sup_{y in X} <F(y), x - y>`.
//!
//! Every method evaluates feasible candidates only and includes `y = x`, so the returned
//! value is a lower estimate of the supremum and never negative.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{dot, norm2, BlockVector};
use crate::error::{invalid, Result, ScviError};
use crate::geometry::ComponentSet;
use crate::problem::ScviProblem;
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapMethod {
    /// Accelerated projected ascent with a Frank-Wolfe upper certificate; needs an affine
    /// map with positive semidefinite symmetric part, which makes the objective concave.
    AffineExact,
    /// Projected ascent with backtracking from `y = x`, the set center and random starts.
    MultiStartAscent { starts: usize, tol: f64 },
    /// Exhaustive evaluation on a grid of spacing `resolution`; only for `n <= 6`.
    GridBruteForce { resolution: f64 },
}

pub fn default_gap_method(problem: &ScviProblem) -> GapMethod {
    let psd = problem
        .map()
        .affine()
        .map(|(a, _)| a.symmetric_part_min_eigenvalue() >= -1e-12 * a.spectral_norm().max(1.0))
        .unwrap_or(false);
    if psd {
        GapMethod::AffineExact
    } else {
        GapMethod::MultiStartAscent { starts: 16, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Best feasible value found.
    pub value: f64,
    /// Certified upper bound on the supremum, when the method provides one.
    pub upper_bound: Option<f64>,
    pub iterations: usize,
}

pub fn gap_function(problem: &ScviProblem, x: &BlockVector, method: GapMethod) -> Result<f64> {
    gap_estimate(problem, x, method).map(|e| e.value)
}

pub fn gap_estimate(problem: &ScviProblem, x: &BlockVector, method: GapMethod) -> Result<GapEstimate> {
    problem.expected_map(x)?;
    match method {
        GapMethod::AffineExact => affine_exact(problem, x),
        GapMethod::MultiStartAscent { starts, tol } => multi_start(problem, x, starts, tol),
        GapMethod::GridBruteForce { resolution } => grid(problem, x, resolution),
    }
}

fn objective(problem: &ScviProblem, x: &[f64], y: &[f64]) -> f64 {
    let f = problem.map().eval(y);
    f.iter()
        .zip(x.iter().zip(y))
        .map(|(fi, (a, b))| fi * (a - b))
        .sum()
}

/// `grad_y <F(y), x - y> = J(y)^T (x - y) - F(y)`.
fn gradient(problem: &ScviProblem, x: &[f64], y: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut g = problem.map().jacobian_tr_mul(y, &diff);
    for (gi, fi) in g.iter_mut().zip(problem.map().eval(y)) {
        *gi -= fi;
    }
    g
}

fn project(problem: &ScviProblem, p: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.len()];
    for (i, g) in problem.geometries().iter().enumerate() {
        let r = problem.layout().range(i);
        g.set.project_into(&p[r.clone()], &mut out[r])?;
    }
    Ok(out)
}

/// `max_{z in X} <g, z - y>`.
fn linear_gap(problem: &ScviProblem, g: &[f64], y: &[f64]) -> f64 {
    problem
        .geometries()
        .iter()
        .enumerate()
        .map(|(i, geom)| {
            let r = problem.layout().range(i);
            geom.set.support(&g[r.clone()]) - dot(&g[r.clone()], &y[r])
        })
        .sum()
}

const AFFINE_TOL: f64 = 1e-10;
const AFFINE_MAX_ITER: usize = 200_000;

fn certified(value: f64, upper: f64, iterations: usize) -> GapEstimate {
    // both are computed in floating point; keep the bound from dipping below the value
    GapEstimate {
        value,
        upper_bound: Some(upper.max(value)),
        iterations,
    }
}

fn affine_exact(problem: &ScviProblem, x: &BlockVector) -> Result<GapEstimate> {
    let (a, _) = problem
        .map()
        .affine()
        .ok_or_else(|| ScviError::NotApplicable("exact gap needs an affine map".into()))?;
    let ev = a.symmetric_part_eigenvalues();
    let scale = a.spectral_norm().max(1.0);
    if ev[0] < -1e-12 * scale {
        return Err(ScviError::NotApplicable(format!(
            "exact gap needs a monotone map; symmetric part has eigenvalue {}",
            ev[0]
        )));
    }
    let x = x.as_slice();
    let curvature = 2.0 * ev[ev.len() - 1];
    if curvature <= 1e-14 * scale {
        // linear objective: the supremum sits at a linear maximiser
        let y0 = problem.center();
        let g = gradient(problem, x, y0.as_slice());
        let value = objective(problem, x, y0.as_slice()) + linear_gap(problem, &g, y0.as_slice());
        return Ok(GapEstimate {
            value: value.max(0.0),
            upper_bound: Some(value.max(0.0)),
            iterations: 0,
        });
    }
    let sym = {
        let m = a.to_dmatrix();
        (&m + m.transpose()) * 0.5
    };
    let step = 1.0 / curvature;
    let mut y = x.to_vec();
    let mut z = y.clone();
    let mut t = 1.0f64;
    let mut best = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut prev_val = objective(problem, x, &y);
    for it in 0..AFFINE_MAX_ITER {
        let gz = gradient(problem, x, &z);
        let trial: Vec<f64> = z.iter().zip(&gz).map(|(a, b)| a + step * b).collect();
        let y_next = project(problem, &trial)?;
        let val = objective(problem, x, &y_next);
        let gy = gradient(problem, x, &y_next);
        best = best.max(val);
        upper = upper.min(val + linear_gap(problem, &gy, &y_next));
        if upper - best <= AFFINE_TOL * best.abs().max(1.0) {
            return Ok(certified(best, upper, it + 1));
        }
        if it % POLISH_EVERY == POLISH_EVERY - 1 {
            if let Some(p) = polish(problem, &sym, x, &y_next)? {
                let pv = objective(problem, x, &p);
                let gp = gradient(problem, x, &p);
                upper = upper.min(pv + linear_gap(problem, &gp, &p));
                if pv > best {
                    best = pv;
                    y = p.clone();
                    z = p;
                    t = 1.0;
                    prev_val = pv;
                }
                if upper - best <= AFFINE_TOL * best.abs().max(1.0) {
                    return Ok(certified(best, upper, it + 1));
                }
                continue;
            }
        }
        if val < prev_val {
            // function-value restart keeps the accelerated scheme monotone
            t = 1.0;
            z = y.clone();
            prev_val = objective(problem, x, &y);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = y_next
            .iter()
            .zip(&y)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        y = y_next;
        t = t_next;
        prev_val = val;
    }
    Err(ScviError::NoConvergence {
        residual: upper - best,
        iterations: AFFINE_MAX_ITER,
    })
}

const POLISH_EVERY: usize = 25;

/// Exact maximiser of the quadratic objective on the face of `X` that contains `y`.
///
/// The objective is `phi(y + h) = phi(y) + <g, h> - h^T S h` with `S` the symmetric part of
/// the map, so on the face the step solves `2 S_FF h + E^T lambda = g_F`, `E h = 0`, where
/// `F` are the free coordinates and `E` the simplex sum constraints. The minimum-norm
/// solution keeps flat directions where they are. Without this step the Frank-Wolfe
/// certificate only shrinks like the square root of the value error.
fn polish(problem: &ScviProblem, sym: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<Option<Vec<f64>>> {
    let mut free = Vec::new();
    let mut sums: Vec<Vec<usize>> = Vec::new();
    for (i, g) in problem.geometries().iter().enumerate() {
        let r = problem.layout().range(i);
        let yb = &y[r.clone()];
        match &g.set {
            ComponentSet::Box { lower, upper } => {
                for (j, v) in yb.iter().enumerate() {
                    if *v > lower[j] && *v < upper[j] {
                        free.push(r.start + j);
                    }
                }
            }
            ComponentSet::Ball { center, radius } => {
                let dist = norm2(&yb.iter().zip(center).map(|(a, b)| a - b).collect::<Vec<_>>());
                if dist < radius * (1.0 - 1e-12) {
                    free.extend(r.clone());
                }
            }
            ComponentSet::Simplex { .. } => {
                let support: Vec<usize> = (0..yb.len()).filter(|&j| yb[j] > 0.0).map(|j| r.start + j).collect();
                if support.len() > 1 {
                    free.extend(&support);
                    sums.push(support);
                }
            }
        }
    }
    if free.is_empty() {
        return Ok(None);
    }
    let (nf, nq) = (free.len(), sums.len());
    let g = gradient(problem, x, y);
    let mut kkt = DMatrix::zeros(nf + nq, nf + nq);
    let mut rhs = DVector::zeros(nf + nq);
    for (a, &ia) in free.iter().enumerate() {
        rhs[a] = g[ia];
        for (b, &ib) in free.iter().enumerate() {
            kkt[(a, b)] = 2.0 * sym[(ia, ib)];
        }
    }
    for (q, support) in sums.iter().enumerate() {
        for &j in support {
            let a = free.iter().position(|&f| f == j).expect("support is free");
            kkt[(a, nf + q)] = 1.0;
            kkt[(nf + q, a)] = 1.0;
        }
    }
    let svd = kkt.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
    let Ok(sol) = svd.solve(&rhs, cutoff) else {
        return Ok(None);
    };
    let mut p = y.to_vec();
    for (a, &ia) in free.iter().enumerate() {
        p[ia] += sol[a];
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    Ok(Some(project(problem, &p)?))
}

const ASCENT_MAX_ITER: usize = 10_000;

fn ascend(problem: &ScviProblem, x: &[f64], start: Vec<f64>, tol: f64) -> Result<(f64, usize)> {
    let mut y = start;
    let mut val = objective(problem, x, &y);
    let mut t = 1.0;
    for it in 0..ASCENT_MAX_ITER {
        let g = gradient(problem, x, &y);
        loop {
            let trial: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let cand = project(problem, &trial)?;
            let d: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dn = norm2(&d);
            if dn <= tol {
                return Ok((val, it));
            }
            let cval = objective(problem, x, &cand);
            if cval >= val + dot(&g, &d) - dn * dn / (2.0 * t) {
                y = cand;
                val = cval;
                t *= 2.0;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return Ok((val, it));
            }
        }
    }
    Ok((val, ASCENT_MAX_ITER))
}

fn multi_start(problem: &ScviProblem, x: &BlockVector, starts: usize, tol: f64) -> Result<GapEstimate> {
    if starts == 0 || !(tol > 0.0) {
        return Err(invalid("starts", "need at least one start and a positive tolerance"));
    }
    let mut stream = NoiseStream::new(0x676170, 0);
    let mut candidates = vec![x.as_slice().to_vec(), problem.center().into_flat()];
    while candidates.len() < starts {
        candidates.push(problem.sample_point(&mut stream).into_flat());
    }
    candidates.truncate(starts.max(1));
    let mut best = 0.0f64;
    let mut iterations = 0;
    for c in candidates {
        let (v, it) = ascend(problem, x.as_slice(), c, tol)?;
        best = best.max(v);
        iterations += it;
    }
    Ok(GapEstimate {
        value: best,
        upper_bound: None,
        iterations,
    })
}

const GRID_MAX_POINTS: f64 = 5e7;

fn grid_axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let steps = ((hi - lo) / h).floor() as usize;
    let mut v: Vec<f64> = (0..=steps).map(|j| lo + j as f64 * h).collect();
    if *v.last().unwrap() < hi {
        v.push(hi);
    }
    v
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for v in axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn block_grid(set: &crate::geometry::ComponentSet, h: f64) -> Vec<Vec<f64>> {
    use crate::geometry::ComponentSet;
    match set {
        ComponentSet::Box { lower, upper } => {
            let axes: Vec<Vec<f64>> = lower.iter().zip(upper).map(|(l, u)| grid_axis(*l, *u, h)).collect();
            cartesian(&axes)
        }
        ComponentSet::Ball { center, radius } => {
            let axes: Vec<Vec<f64>> = center
                .iter()
                .map(|c| grid_axis(c - radius, c + radius, h))
                .collect();
            cartesian(&axes)
                .into_iter()
                .filter(|p| set.contains(p, 1e-12))
                .collect()
        }
        ComponentSet::Simplex { dim } => {
            let axes = vec![grid_axis(0.0, 1.0, h); dim - 1];
            cartesian(&axes)
                .into_iter()
                .filter_map(|mut p| {
                    let s: f64 = p.iter().sum();
                    (s <= 1.0 + 1e-12).then(|| {
                        p.push((1.0 - s).max(0.0));
                        p
                    })
                })
                .collect()
        }
    }
}

fn grid(problem: &ScviProblem, x: &BlockVector, resolution: f64) -> Result<GapEstimate> {
    if problem.dim() > 6 {
        return Err(ScviError::NotApplicable(format!(
            "grid search is limited to dimension 6, got {}",
            problem.dim()
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(invalid("resolution", "must be positive"));
    }
    let mut estimate = 1.0f64;
    for g in problem.geometries() {
        let span = 2.0 * g.set.bound(crate::geometry::Norm::L2);
        estimate *= (span / resolution + 2.0).powi(g.dim() as i32);
    }
    if estimate > GRID_MAX_POINTS {
        return Err(invalid(
            "resolution",
            format!("grid of about {estimate:.3e} points exceeds the cap of {GRID_MAX_POINTS:.0e}"),
        ));
    }
    let per_block: Vec<Vec<Vec<f64>>> = problem
        .geometries()
        .iter()
        .map(|g| block_grid(&g.set, resolution))
        .collect();
    let x = x.as_slice();
    let mut best = 0.0f64;
    let mut count = 0;
    let mut idx = vec![0usize; per_block.len()];
    let mut y = Vec::with_capacity(problem.dim());
    loop {
        y.clear();
        for (b, &j) in per_block.iter().zip(&idx) {
            y.extend_from_slice(&b[j]);
        }
        best = best.max(objective(problem, x, &y));
        count += 1;
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(GapEstimate {
                    value: best,
                    upper_bound: None,
                    iterations: count,
                });
            }
            idx[pos] += 1;
            if idx[pos] < per_block[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BlockGeometry, ComponentSet};
    use crate::linalg::Matrix;
    use crate::problem::{affine_with_solution, MonotonicityClass, NoiseModel};

    fn identity_1d() -> ScviProblem {
        affine_with_solution(
            "t",
            0,
            vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())],
            Matrix::identity(1),
            vec![0.0],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::Monotone,
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_quadratic() {
        let p = identity_1d();
        let x = p.vector(vec![1.0]).unwrap();
        for m in [
            GapMethod::AffineExact,
            GapMethod::MultiStartAscent { starts: 4, tol: 1e-12 },
            GapMethod::GridBruteForce { resolution: 1e-3 },
        ] {
            let g = gap_function(&p, &x, m).unwrap();
            assert!((g - 0.25).abs() < 1e-9, "{m:?}: {g}");
        }
        let e = gap_estimate(&p, &x, GapMethod::AffineExact).unwrap();
        assert!(e.upper_bound.unwrap() - e.value <= 1e-10);
    }

    #[test]
    fn zero_at_solution() {
        let p = identity_1d();
        let x = p.vector(vec![0.0]).unwrap();
        assert!(gap_function(&p, &x, GapMethod::AffineExact).unwrap().abs() < 1e-10);
    }

    #[test]
    fn inapplicable_methods() {
        let p = identity_1d();
        let x = p.vector(vec![0.0]).unwrap();
        assert!(gap_function(&p, &x, GapMethod::GridBruteForce { resolution: 1e-9 }).is_err());
        let neg = affine_with_solution(
            "t",
            0,
            vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())],
            Matrix::new(1, 1, vec![-1.0]).unwrap(),
            vec![0.0],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::Monotone,
        )
        .unwrap();
        assert!(matches!(
            gap_function(&neg, &x, GapMethod::AffineExact),
            Err(ScviError::NotApplicable(_))
        ));
    }

    #[test]
    fn skew_gap_closed_form() {
        // F(y) = A y + b with A skew: <F(y), x - y> = b^T x + (A^T x - b)^T y, linear in y
        let a = Matrix::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        let p = affine_with_solution(
            "t",
            0,
            vec![BlockGeometry::euclidean(ComponentSet::cube(2, -1.0, 1.0).unwrap())],
            a.clone(),
            vec![0.2, -0.1],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::Monotone,
        )
        .unwrap();
        let b = p.map().linear_part().1.to_vec();
        let x = p.vector(vec![0.5, 0.7]).unwrap();
        let atx = a.tr_mul_vec(x.as_slice());
        let closed = dot(&b, x.as_slice()) + atx.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>();
        let g = gap_function(&p, &x, GapMethod::AffineExact).unwrap();
        assert!((g - closed).abs() < 1e-12);
    }
}
