//! Replication orchestration and aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scvi::metrics::{
    averaged_gap_bound, averaged_objective_bound, fit_rate, gap_function, lyapunov, mean_and_se,
    mse, mse_bound, rate_constants, RateFit, RateInputs,
};
use scvi::solvers::{natural_residual, run_bsmp, run_smp, Checkpoint, RunTrace, SolverConfig, StepSums};
use scvi::{BlockVector, MonotonicityClass, ProblemConstants};

use crate::config::{Algorithm, ExperimentConfig, Metric, ResolvedExperiment, ScheduleKind};
use crate::error::Result;

/// One measurement: metric `metric` of replication `replication` at iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub replication: usize,
    pub k: usize,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub k: usize,
    pub mean: f64,
    pub standard_error: f64,
    /// Theoretical bound on the mean at this `k`, where one applies.
    pub bound: Option<f64>,
    /// `mean <= bound + 3 standard errors`.
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub points: Vec<PointSummary>,
    /// Log-log slope of the mean over checkpoints with `k >= fit_from`.
    pub fit: Option<RateFit>,
    pub fit_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub name: String,
    pub blocks: usize,
    pub dim: usize,
    pub class: MonotonicityClass,
    pub constants: ProblemConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub master_seed: u64,
    pub replications: usize,
    pub config: ExperimentConfig,
    pub problem: ProblemInfo,
    pub metrics: Vec<MetricSummary>,
    /// Mean number of selections per block.
    pub mean_block_counts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub resolved: ResolvedExperiment,
    /// Ordered by replication, then checkpoint, then metric in config order.
    pub records: Vec<Record>,
    pub summary: Summary,
}

fn evaluate(
    exp: &ResolvedExperiment,
    metric: Metric,
    ck: &Checkpoint,
) -> Result<Option<f64>> {
    let p = &exp.problem;
    let point: &BlockVector = if metric.averaged() {
        match &ck.average {
            Some(a) => a,
            None => return Ok(None),
        }
    } else {
        &ck.x
    };
    let geoms = p.geometries();
    let value = match metric {
        Metric::DistanceSq | Metric::AveragedDistanceSq => {
            mse(geoms, point, p.known_solution().expect("checked at resolve"))?
        }
        Metric::Lyapunov => lyapunov(
            &exp.probabilities,
            geoms,
            point,
            p.known_solution().expect("checked at resolve"),
        )?,
        Metric::ObjectiveGap | Metric::AveragedObjectiveGap => p.objective_gap(point)?,
        Metric::Gap | Metric::AveragedGap => {
            gap_function(p, point, exp.gap_method.expect("set when a gap metric is requested"))?
        }
        Metric::Residual => natural_residual(p, point)?,
    };
    Ok(Some(value))
}

fn run_one(exp: &ResolvedExperiment, rep: usize) -> Result<(RunTrace, Vec<Record>)> {
    let trace = match exp.solver_config(rep as u64) {
        SolverConfig::Bsmp(c) => run_bsmp(&exp.problem, &c)?,
        SolverConfig::Smp(c) => run_smp(&exp.problem, &c)?,
    };
    let mut records = Vec::new();
    for ck in &trace.checkpoints {
        for &metric in &exp.config.metrics {
            if let Some(value) = evaluate(exp, metric, ck)? {
                records.push(Record {
                    replication: rep,
                    k: ck.k,
                    metric,
                    value,
                });
            }
        }
    }
    Ok((trace, records))
}

/// Theoretical bound on the mean of `metric` at a checkpoint, when the run satisfies the
/// premises of one of the rate results.
fn bound_for(exp: &ResolvedExperiment, metric: Metric, k: usize, sums: Option<&StepSums>) -> Result<Option<f64>> {
    let p = &exp.problem;
    let c = p.constants();
    let geoms = p.geometries();
    let s = &exp.config.solver;
    let gamma0 = exp.schedule.initial();
    match (metric, s.algorithm) {
        (Metric::DistanceSq, Algorithm::Bsmp) => {
            let Some(mu) = c.mu else { return Ok(None) };
            let d = p.num_blocks();
            let uniform = s.block_probs.is_none();
            let max_l = geoms.iter().map(|g| g.l_omega).fold(0.0, f64::max);
            let prescribed = d as f64 * max_l / mu;
            if s.schedule != ScheduleKind::Harmonic
                || !uniform
                || (gamma0 - prescribed).abs() > 1e-12 * prescribed
                || k < 2
            {
                return Ok(None);
            }
            let rates = rate_constants(c, geoms, RateInputs { r: 0.0, gamma: 1.0, gamma0: 1.0 })?;
            Ok(Some(mse_bound(&rates, d, k)?))
        }
        (Metric::AveragedObjectiveGap, Algorithm::Bsmp) => match sums {
            Some(sums) if p.class() == MonotonicityClass::ConvexGradient => Ok(Some(
                averaged_objective_bound(c, geoms, &exp.probabilities, s.r.unwrap_or(0.0), sums)?,
            )),
            _ => Ok(None),
        },
        (Metric::AveragedGap, Algorithm::Smp) => match sums {
            Some(sums) if p.class().is_monotone() && k >= 1 => {
                Ok(Some(averaged_gap_bound(c, geoms, s.r.unwrap_or(0.0), sums)?))
            }
            _ => Ok(None),
        },
        _ => Ok(None),
    }
}

/// Runs all replications, each on its own noise streams; results land in indexed slots,
/// so the output does not depend on the number of worker threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let exp = config.resolve()?;
    run_resolved(exp)
}

pub fn run_resolved(exp: ResolvedExperiment) -> Result<ExperimentResult> {
    let reps = exp.config.replications;
    let results: Vec<Result<(RunTrace, Vec<Record>)>> =
        (0..reps).into_par_iter().map(|rep| run_one(&exp, rep)).collect();
    let mut traces = Vec::with_capacity(reps);
    let mut records = Vec::new();
    for r in results {
        let (trace, recs) = r?;
        traces.push(trace);
        records.extend(recs);
    }

    let d = exp.problem.num_blocks();
    let mut mean_block_counts = vec![0.0; d];
    for t in &traces {
        for (m, c) in mean_block_counts.iter_mut().zip(&t.block_counts) {
            *m += *c as f64 / reps as f64;
        }
    }

    // the schedule is deterministic, so every replication traces the same sums
    let reference = &traces[0];
    let mut metrics = Vec::with_capacity(exp.config.metrics.len());
    for &metric in &exp.config.metrics {
        let mut points = Vec::new();
        for ck in &reference.checkpoints {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.metric == metric && r.k == ck.k)
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                continue;
            }
            let (mean, se) = mean_and_se(&values);
            let bound = bound_for(&exp, metric, ck.k, ck.sums.as_ref())?;
            points.push(PointSummary {
                k: ck.k,
                mean,
                standard_error: se,
                bound,
                within_bound: bound.map(|b| mean <= b + 3.0 * se),
            });
        }
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.k as f64, p.mean)).collect();
        let (fit, fit_note) = match fit_rate(&pairs, exp.config.fit_from.max(1.0)) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        metrics.push(MetricSummary {
            metric,
            points,
            fit,
            fit_note,
        });
    }

    let p = &exp.problem;
    let summary = Summary {
        run_id: exp.config.name.clone(),
        master_seed: exp.config.seed,
        replications: reps,
        config: exp.config.clone(),
        problem: ProblemInfo {
            name: p.name().to_string(),
            blocks: p.num_blocks(),
            dim: p.dim(),
            class: p.class(),
            constants: p.constants().clone(),
        },
        metrics,
        mean_block_counts,
    };
    Ok(ExperimentResult {
        resolved: exp,
        records,
        summary,
    })
}

impl Summary {
    pub fn metric(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}
