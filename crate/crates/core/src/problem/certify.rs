//! Sampling certificates for monotonicity classes, problem constants and known solutions.
//! A failed certificate is a report, not an error.

use serde::{Deserialize, Serialize};

use super::{ConstantSource, ScviProblem};
use crate::block::{dot, BlockVector};
use crate::error::{Result, ScviError};
use crate::rng::NoiseStream;

/// The defining inequalities of the monotonicity hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotonicityTest {
    /// `<F(x) - F(y), x - y> >= 0`.
    Monotone,
    /// `<F(x) - F(y), x - y> > 0` for `x != y`.
    StrictlyMonotone,
    /// `<F(x) - F(y), x - y> >= mu ||x - y||^2`.
    StronglyMonotone { mu: f64 },
    /// `<F(y), x - y> >= 0` implies `<F(x), x - y> >= 0`.
    PseudoMonotone,
    /// `<F(y), x - y> >= 0` implies `<F(x), x - y> > 0` for `x != y`.
    StrictlyPseudoMonotone,
    /// `<F(y), x - y> >= 0` implies `<F(x), x - y> >= mu ||x - y||^2`.
    StronglyPseudoMonotone { mu: f64 },
}

impl MonotonicityTest {
    fn is_pseudo(self) -> bool {
        matches!(
            self,
            MonotonicityTest::PseudoMonotone
                | MonotonicityTest::StrictlyPseudoMonotone
                | MonotonicityTest::StronglyPseudoMonotone { .. }
        )
    }

    /// Whether a normalised margin `<., x - y> / ||x - y||^2` satisfies the conclusion.
    fn accepts(self, margin: f64) -> bool {
        const REL: f64 = 1e-10;
        match self {
            MonotonicityTest::Monotone | MonotonicityTest::PseudoMonotone => margin >= -REL,
            MonotonicityTest::StrictlyMonotone | MonotonicityTest::StrictlyPseudoMonotone => {
                margin > 0.0
            }
            MonotonicityTest::StronglyMonotone { mu }
            | MonotonicityTest::StronglyPseudoMonotone { mu } => margin >= mu * (1.0 - REL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatingPair {
    pub x: BlockVector,
    pub y: BlockVector,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub test: MonotonicityTest,
    pub samples: usize,
    /// Ordered pairs on which the conclusion was evaluated (premise held, for pseudo classes).
    pub premise_pairs: usize,
    pub passed: bool,
    /// Smallest observed `<., x - y> / ||x - y||^2` over evaluated pairs.
    pub worst_margin: f64,
    pub violating_pair: Option<ViolatingPair>,
}

/// Checks the inequality of `test` on `samples` random pairs: half drawn independently,
/// half as short steps `y = x + t (z - x)` that probe local behaviour.
pub fn certify_monotonicity(
    problem: &ScviProblem,
    test: MonotonicityTest,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let mut stream = NoiseStream::new(seed, 0x6d6f6e6f);
    let mut report = CertificateReport {
        test,
        samples,
        premise_pairs: 0,
        passed: true,
        worst_margin: f64::INFINITY,
        violating_pair: None,
    };
    for t in 0..samples {
        let x = problem.sample_point(&mut stream);
        let z = problem.sample_point(&mut stream);
        let y = if t % 2 == 0 {
            z
        } else {
            let step = 0.02 + 0.08 * stream.uniform();
            let data = x
                .as_slice()
                .iter()
                .zip(z.as_slice())
                .map(|(a, b)| a + step * (b - a))
                .collect();
            problem.vector(data)?
        };
        let diff: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect();
        let dist2 = problem.norm(&problem.vector(diff.clone())?).powi(2);
        if dist2 <= f64::MIN_POSITIVE {
            continue;
        }
        let fx = problem.expected_map(&x)?;
        let fy = problem.expected_map(&y)?;
        let fxd = dot(fx.as_slice(), &diff);
        let fyd = dot(fy.as_slice(), &diff);
        let mut candidates = Vec::with_capacity(2);
        if test.is_pseudo() {
            // premise <F(y), x - y> >= 0 and its mirror <F(x), y - x> >= 0
            if fyd >= 0.0 {
                candidates.push((fxd / dist2, false));
            }
            if -fxd >= 0.0 {
                candidates.push((-fyd / dist2, true));
            }
        } else {
            candidates.push(((fxd - fyd) / dist2, false));
        }
        for (margin, swapped) in candidates {
            report.premise_pairs += 1;
            if margin < report.worst_margin {
                report.worst_margin = margin;
            }
            if !test.accepts(margin) {
                let worse = report
                    .violating_pair
                    .as_ref()
                    .is_none_or(|v| margin < v.margin);
                report.passed = false;
                if worse {
                    let (a, b) = if swapped { (&y, &x) } else { (&x, &y) };
                    report.violating_pair = Some(ViolatingPair {
                        x: a.clone(),
                        y: b.clone(),
                        margin,
                    });
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConstantCheck {
    pub declared_map_bound: f64,
    pub sampled_map_bound: f64,
    pub declared_lipschitz: f64,
    pub sampled_lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub source: ConstantSource,
    pub samples: usize,
    pub blocks: Vec<BlockConstantCheck>,
    pub passed: bool,
}

/// Compares the declared `C_i` and `L_i` with maxima over random feasible points and
/// random single-block perturbations.
pub fn certify_constants(problem: &ScviProblem, samples: usize, seed: u64) -> Result<ConstantsReport> {
    let d = problem.num_blocks();
    let c = problem.constants();
    let mut stream = NoiseStream::new(seed, 0x636f6e73);
    let mut map_max = vec![0.0f64; d];
    let mut lip_max = vec![0.0f64; d];
    for _ in 0..samples {
        let x = problem.sample_point(&mut stream);
        let fx = problem.expected_map(&x)?;
        let other = problem.sample_point(&mut stream);
        for i in 0..d {
            let g = problem.geometry(i);
            map_max[i] = map_max[i].max(g.norm.dual(fx.block(i)));
            let mut y = x.clone();
            y.block_mut(i).copy_from_slice(other.block(i));
            let dist = g.norm(
                &x.block(i)
                    .iter()
                    .zip(y.block(i))
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            if dist > 1e-12 {
                let mut fy = vec![0.0; g.dim()];
                problem.expected_block_into(i, y.as_slice(), &mut fy);
                let df: Vec<f64> = fx.block(i).iter().zip(&fy).map(|(a, b)| a - b).collect();
                lip_max[i] = lip_max[i].max(g.norm.dual(&df) / dist);
            }
        }
    }
    let blocks: Vec<BlockConstantCheck> = (0..d)
        .map(|i| BlockConstantCheck {
            declared_map_bound: c.map_bounds[i],
            sampled_map_bound: map_max[i],
            declared_lipschitz: c.lipschitz[i],
            sampled_lipschitz: lip_max[i],
        })
        .collect();
    let passed = blocks.iter().all(|b| {
        b.sampled_map_bound <= b.declared_map_bound * (1.0 + 1e-9) + 1e-12
            && b.sampled_lipschitz <= b.declared_lipschitz * (1.0 + 1e-9) + 1e-12
    });
    Ok(ConstantsReport {
        source: c.source,
        samples,
        blocks,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub samples: usize,
    /// `min_x <F(x*), x - x*>` over the samples, vertices of the sets included.
    pub min_residual: f64,
    pub passed: bool,
}

/// Samples `<F(x*), x - x*>` over random feasible `x`; a solution keeps it nonnegative.
pub fn check_solution(problem: &ScviProblem, samples: usize, seed: u64) -> Result<SolutionCheck> {
    let x_star = problem
        .known_solution()
        .ok_or_else(|| ScviError::NotApplicable("instance has no known solution".into()))?;
    let f = problem.expected_map(x_star)?;
    let mut stream = NoiseStream::new(seed, 0x736f6c);
    // the worst feasible point is the linear minimiser of <F(x*), .>
    let worst: Vec<f64> = problem
        .geometries()
        .iter()
        .enumerate()
        .flat_map(|(i, g)| {
            let neg: Vec<f64> = f.block(i).iter().map(|v| -v).collect();
            g.set.linear_maximizer(&neg)
        })
        .collect();
    let residual = |x: &[f64]| -> f64 {
        f.as_slice()
            .iter()
            .zip(x.iter().zip(x_star.as_slice()))
            .map(|(fi, (a, b))| fi * (a - b))
            .sum()
    };
    let mut min_residual = residual(&worst);
    for _ in 0..samples {
        let x = problem.sample_point(&mut stream);
        min_residual = min_residual.min(residual(x.as_slice()));
    }
    Ok(SolutionCheck {
        samples,
        min_residual,
        passed: min_residual >= -1e-8,
    })
}
