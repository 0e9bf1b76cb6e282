use std::time::Instant;

use super::{
    average_into, Checkpoint, DivergenceGuard, IterateObserver, NoObserver, RunTrace, SmpConfig,
    SolverConfig, StepSums,
};
use crate::block::BlockVector;
use crate::error::Result;
use crate::problem::{Draw, ScviProblem};
use crate::rng::RunStreams;

pub fn run_smp(problem: &ScviProblem, config: &SmpConfig) -> Result<RunTrace> {
    run_smp_observed(problem, config, &mut NoObserver)
}

/// Full-block stochastic mirror-prox: every block takes the extrapolation and update
/// steps each iteration, and `y_bar_K = sum_{k<K} gamma_k^r y_{k+1} / sum_{k<K} gamma_k^r`
/// is maintained recursively from `Gamma_0 = 0`.
pub fn run_smp_observed(
    problem: &ScviProblem,
    config: &SmpConfig,
    observer: &mut dyn IterateObserver,
) -> Result<RunTrace> {
    let start = Instant::now();
    config.validate()?;
    let d = problem.num_blocks();
    let layout = problem.layout().clone();
    let mut streams = RunStreams::new(config.seed, config.replication);
    let mut x = config.initial.resolve(problem, &mut streams.init)?;
    let guard = DivergenceGuard::new(problem);
    let ks = config.checkpoints.resolve(config.iterations);
    let mut next_ck = ks.iter().peekable();
    let r = config.r;

    let mut y = BlockVector::zeros(layout.clone());
    let mut y_bar = BlockVector::zeros(layout.clone());
    let mut dual = vec![0.0; problem.dim()];
    let mut weight_sum = 0.0;
    let mut step_power_sum = 0.0;
    let mut checkpoints = Vec::with_capacity(ks.len());

    observer.observe(0, &x);
    if next_ck.peek() == Some(&&0) {
        // y_bar_0 is a placeholder, not a feasible average
        checkpoints.push(Checkpoint {
            k: 0,
            x: x.clone(),
            average: None,
            sums: None,
        });
        next_ck.next();
    }
    for k in 0..config.iterations {
        let gamma = config.schedule.gamma(k);
        for i in 0..d {
            let rg = layout.range(i);
            problem.sample_block_into(
                i,
                x.as_slice(),
                &mut streams.extrapolation,
                Draw::Extrapolation,
                &mut dual[rg.clone()],
            )?;
            dual[rg.clone()].iter_mut().for_each(|v| *v *= gamma);
            problem
                .geometry(i)
                .prox_map_into(x.block(i), &dual[rg], y.block_mut(i))?;
        }
        for i in 0..d {
            let rg = layout.range(i);
            problem.sample_block_into(
                i,
                y.as_slice(),
                &mut streams.update,
                Draw::Update,
                &mut dual[rg.clone()],
            )?;
            dual[rg].iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..d {
            let rg = layout.range(i);
            let anchor = x.block(i).to_vec();
            problem
                .geometry(i)
                .prox_map_into(&anchor, &dual[rg], x.block_mut(i))?;
        }
        guard.check(problem, k + 1, &x)?;
        guard.check(problem, k + 1, &y)?;
        weight_sum = average_into(weight_sum, y_bar.as_mut_slice(), y.as_slice(), gamma.powf(r));
        step_power_sum += gamma.powf(r + 1.0);
        observer.observe(k + 1, &x);
        if next_ck.peek() == Some(&&(k + 1)) {
            checkpoints.push(Checkpoint {
                k: k + 1,
                x: x.clone(),
                average: Some(y_bar.clone()),
                sums: Some(StepSums {
                    weight_sum,
                    step_power_sum,
                    last_gamma: gamma,
                }),
            });
            next_ck.next();
        }
    }
    Ok(RunTrace {
        config: SolverConfig::Smp(config.clone()),
        checkpoints,
        block_counts: vec![config.iterations as u64; d],
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
