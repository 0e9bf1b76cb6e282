use std::time::Instant;

use super::{
    average_into, BsmpConfig, Checkpoint, DivergenceGuard, IterateObserver, NoObserver, RunTrace,
    SolverConfig, StepSums,
};
use crate::block::BlockVector;
use crate::error::{Result, ScviError};
use crate::problem::{Draw, ScviProblem};
use crate::rng::{NoiseStream, RunStreams};

/// Scratch buffers sized for the largest block.
pub(crate) struct BlockScratch {
    dual: Vec<f64>,
    anchor: Vec<f64>,
    extrapolated: Vec<f64>,
}

impl BlockScratch {
    pub(crate) fn new(problem: &ScviProblem) -> Self {
        let m = problem.layout().sizes().iter().copied().max().unwrap_or(0);
        Self {
            dual: vec![0.0; m],
            anchor: vec![0.0; m],
            extrapolated: vec![0.0; m],
        }
    }
}

/// Updates block `i` of `x` in place:
/// `y^i = P_i(x^i, gamma F_i(x, xi~))`, then `x^i <- P_i(x^i, gamma F_i(y, xi))` where `y`
/// is `x` with block `i` replaced by `y^i`.
pub(crate) fn step_in_place(
    problem: &ScviProblem,
    x: &mut BlockVector,
    gamma: f64,
    i: usize,
    extrapolation: &mut NoiseStream,
    update: &mut NoiseStream,
    scratch: &mut BlockScratch,
) -> Result<()> {
    let m = problem.layout().size(i);
    let geom = problem.geometry(i);
    let dual = &mut scratch.dual[..m];
    let anchor = &mut scratch.anchor[..m];
    let y = &mut scratch.extrapolated[..m];

    problem.sample_block_into(i, x.as_slice(), extrapolation, Draw::Extrapolation, dual)?;
    dual.iter_mut().for_each(|v| *v *= gamma);
    anchor.copy_from_slice(x.block(i));
    geom.prox_map_into(anchor, dual, y)?;

    x.block_mut(i).copy_from_slice(y);
    let sampled = problem.sample_block_into(i, x.as_slice(), update, Draw::Update, dual);
    if let Err(e) = sampled {
        x.block_mut(i).copy_from_slice(anchor);
        return Err(e);
    }
    dual.iter_mut().for_each(|v| *v *= gamma);
    geom.prox_map_into(anchor, dual, x.block_mut(i))
}

/// One B-SMP iteration on block `block`; all other blocks are copied unchanged.
pub fn bsmp_step(
    problem: &ScviProblem,
    x: &BlockVector,
    gamma: f64,
    block: usize,
    extrapolation: &mut NoiseStream,
    update: &mut NoiseStream,
) -> Result<BlockVector> {
    if block >= problem.num_blocks() {
        return Err(ScviError::InvalidParameter {
            name: "block",
            reason: format!("{block} is not below {}", problem.num_blocks()),
        });
    }
    let mut next = problem.vector(x.as_slice().to_vec())?;
    let mut scratch = BlockScratch::new(problem);
    step_in_place(problem, &mut next, gamma, block, extrapolation, update, &mut scratch)?;
    Ok(next)
}

pub fn run_bsmp(problem: &ScviProblem, config: &BsmpConfig) -> Result<RunTrace> {
    run_bsmp_observed(problem, config, &mut NoObserver)
}

/// Runs `K` B-SMP iterations with blocks drawn i.i.d. from `p`, maintaining the weighted
/// average `x_bar_k = sum_t gamma_t^r x_t / sum_t gamma_t^r` when an exponent is set.
pub fn run_bsmp_observed(
    problem: &ScviProblem,
    config: &BsmpConfig,
    observer: &mut dyn IterateObserver,
) -> Result<RunTrace> {
    let start = Instant::now();
    let d = problem.num_blocks();
    config.validate(d)?;
    let probs = config.probabilities(d)?;
    let mut streams = RunStreams::new(config.seed, config.replication);
    let mut x = config.initial.resolve(problem, &mut streams.init)?;
    let guard = DivergenceGuard::new(problem);
    let schedule = config.schedule;
    let ks = config.checkpoints.resolve(config.iterations);
    let mut next_ck = ks.iter().peekable();

    let mut avg = config.averaging.map(|r| {
        let g0 = schedule.gamma(0);
        (r, g0.powf(r), g0.powf(r + 1.0), x.clone())
    });
    let mut checkpoints = Vec::with_capacity(ks.len());
    let mut record = |k: usize, x: &BlockVector, avg: &Option<(f64, f64, f64, BlockVector)>| {
        checkpoints.push(Checkpoint {
            k,
            x: x.clone(),
            average: avg.as_ref().map(|a| a.3.clone()),
            sums: avg.as_ref().map(|&(_, s, p, _)| StepSums {
                weight_sum: s,
                step_power_sum: p,
                last_gamma: schedule.gamma(k),
            }),
        });
    };

    observer.observe(0, &x);
    if next_ck.peek() == Some(&&0) {
        record(0, &x, &avg);
        next_ck.next();
    }
    let mut counts = vec![0u64; d];
    let mut scratch = BlockScratch::new(problem);
    for k in 0..config.iterations {
        let i = streams.blocks.categorical(&probs);
        counts[i] += 1;
        step_in_place(
            problem,
            &mut x,
            schedule.gamma(k),
            i,
            &mut streams.extrapolation,
            &mut streams.update,
            &mut scratch,
        )?;
        guard.check(problem, k + 1, &x)?;
        if let Some((r, s, p, a)) = avg.as_mut() {
            let g = schedule.gamma(k + 1);
            *s = average_into(*s, a.as_mut_slice(), x.as_slice(), g.powf(*r));
            *p += g.powf(*r + 1.0);
        }
        observer.observe(k + 1, &x);
        if next_ck.peek() == Some(&&(k + 1)) {
            record(k + 1, &x, &avg);
            next_ck.next();
        }
    }
    Ok(RunTrace {
        config: SolverConfig::Bsmp(config.clone()),
        checkpoints,
        block_counts: counts,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BlockGeometry, ComponentSet};
    use crate::linalg::Matrix;
    use crate::problem::{affine_with_solution, MonotonicityClass, NoiseModel};
    use crate::solvers::{Checkpoints, StepsizeSchedule};

    fn scalar_problem() -> ScviProblem {
        let geoms = vec![BlockGeometry::euclidean(ComponentSet::cube(1, -1.0, 1.0).unwrap())];
        affine_with_solution(
            "t",
            0,
            geoms,
            Matrix::new(1, 1, vec![2.0]).unwrap(),
            vec![0.3],
            NoiseModel::uniform(1, 0.0),
            MonotonicityClass::StronglyPseudoMonotone { mu: 2.0 },
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_step() {
        let p = scalar_problem();
        let x = p.vector(vec![1.0]).unwrap();
        let mut a = NoiseStream::from_seed(0);
        let mut b = NoiseStream::from_seed(1);
        let next = bsmp_step(&p, &x, 0.1, 0, &mut a, &mut b).unwrap();
        // y = 1 - 0.1 * 1.4 = 0.86, x' = 1 - 0.1 * 2 * (0.86 - 0.3) = 0.888
        assert!((next.as_slice()[0] - 0.888).abs() < 1e-15);
        let same = bsmp_step(&p, &x, 0.0, 0, &mut a, &mut b).unwrap();
        assert_eq!(same, x);
        assert!(bsmp_step(&p, &x, 0.1, 1, &mut a, &mut b).is_err());
    }

    #[test]
    fn zero_iterations_keep_initial_point() {
        let p = scalar_problem();
        let cfg = BsmpConfig::new(StepsizeSchedule::Harmonic { gamma0: 1.0 }, 0, 3);
        let t = run_bsmp(&p, &cfg).unwrap();
        assert_eq!(t.checkpoints.len(), 1);
        assert_eq!(t.checkpoints[0].k, 0);
        assert_eq!(t.checkpoints[0].x, p.center());
    }

    #[test]
    fn averaged_run_records_sums() {
        let p = scalar_problem();
        let mut cfg = BsmpConfig::new(StepsizeSchedule::InverseSqrt { gamma0: 0.5 }, 8, 3);
        cfg.averaging = Some(0.0);
        cfg.checkpoints = Checkpoints::Explicit { ks: vec![8] };
        let t = run_bsmp(&p, &cfg).unwrap();
        let s = t.last().sums.unwrap();
        assert_eq!(s.weight_sum, 9.0);
        let expected: f64 = (0..=8).map(|k| 0.5 / ((k + 1) as f64).sqrt()).sum();
        assert!((s.step_power_sum - expected).abs() < 1e-12);
    }
}
