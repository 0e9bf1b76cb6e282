//! Experiment configuration: one JSON document describing the instance, the solver and
//! what to measure.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scvi::metrics::GapMethod;
use scvi::problem::{
    make_monotone_affine, make_nash_quadratic, make_scop_quadratic, make_strictly_pseudo_monotone,
    make_strongly_monotone_affine, MonotoneAffineParams, NashParams, Scaling, ScopParams,
    StronglyMonotoneParams,
};
use scvi::solvers::{
    auto_gamma0, validate_exponent, validate_probabilities, BsmpConfig, Checkpoints, Gamma0Rule,
    InitialPoint, SmpConfig, SolverConfig, StepsizeSchedule,
};
use scvi::ScviProblem;

use crate::error::{config_error, io_error, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ProblemSpec {
    StronglyMonotoneAffine(StronglyMonotoneParams),
    MonotoneAffine(MonotoneAffineParams),
    ScopQuadratic(ScopParams),
    NashQuadratic(NashParams),
    /// A strongly monotone affine base multiplied by a positive scalar field.
    StrictlyPseudoMonotone {
        base: StronglyMonotoneParams,
        #[serde(default)]
        scaling: Option<Scaling>,
    },
    /// A fully specified instance document.
    Instance { problem: ScviProblem },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ScviProblem> {
        Ok(match self {
            ProblemSpec::StronglyMonotoneAffine(p) => make_strongly_monotone_affine(p)?,
            ProblemSpec::MonotoneAffine(p) => make_monotone_affine(p)?,
            ProblemSpec::ScopQuadratic(p) => make_scop_quadratic(p)?,
            ProblemSpec::NashQuadratic(p) => make_nash_quadratic(p)?,
            ProblemSpec::StrictlyPseudoMonotone { base, scaling } => {
                let base = make_strongly_monotone_affine(base)?;
                let scaling = scaling.clone().unwrap_or_else(|| Scaling::default_for(base.dim()));
                make_strictly_pseudo_monotone(&base, scaling)?
            }
            ProblemSpec::Instance { problem } => problem.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bsmp,
    Smp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Harmonic,
    InverseSqrt,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoToken {
    Auto,
}

/// A number, or `"auto"` for the schedule's prescribed initial stepsize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma0Spec {
    Value(f64),
    Auto(AutoToken),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    pub schedule: ScheduleKind,
    pub gamma0: Gamma0Spec,
    /// Averaging exponent; required for SMP, optional for B-SMP.
    #[serde(default)]
    pub r: Option<f64>,
    /// Block distribution; uniform when absent.
    #[serde(default)]
    pub block_probs: Option<Vec<f64>>,
    pub iterations: usize,
    #[serde(default)]
    pub initial: InitialPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `||x_k - x*||^2` in the composite norm.
    DistanceSq,
    /// `||x_bar_k - x*||^2` for the running average.
    AveragedDistanceSq,
    /// `sum_i p_i^{-1} D_i(x_k^i, x*^i)`.
    Lyapunov,
    /// `f(x_k) - f*`.
    ObjectiveGap,
    /// `f(x_bar_k) - f*`.
    AveragedObjectiveGap,
    /// `G(x_k)`.
    Gap,
    /// `G` at the running average.
    AveragedGap,
    /// Natural residual `||x - Proj(x - F(x))||`.
    Residual,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::DistanceSq => "distance_sq",
            Metric::AveragedDistanceSq => "averaged_distance_sq",
            Metric::Lyapunov => "lyapunov",
            Metric::ObjectiveGap => "objective_gap",
            Metric::AveragedObjectiveGap => "averaged_objective_gap",
            Metric::Gap => "gap",
            Metric::AveragedGap => "averaged_gap",
            Metric::Residual => "residual",
        }
    }

    fn needs_solution(self) -> bool {
        matches!(
            self,
            Metric::DistanceSq | Metric::AveragedDistanceSq | Metric::Lyapunov
        )
    }

    fn needs_objective(self) -> bool {
        matches!(self, Metric::ObjectiveGap | Metric::AveragedObjectiveGap)
    }

    pub(crate) fn averaged(self) -> bool {
        matches!(
            self,
            Metric::AveragedDistanceSq | Metric::AveragedObjectiveGap | Metric::AveragedGap
        )
    }
}

fn default_fit_from() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used as the run id and as the stem of the output files.
    pub name: String,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub replications: usize,
    /// Master seed for the solver noise; replication `i` uses streams derived from it and `i`.
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    pub metrics: Vec<Metric>,
    /// Gap evaluation method; chosen from the instance when absent.
    #[serde(default)]
    pub gap_method: Option<GapMethod>,
    /// Checkpoints below this `k` are left out of rate fits.
    #[serde(default = "default_fit_from")]
    pub fit_from: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A validated configuration together with its instance and solver settings.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    /// The configuration with `gamma0` made explicit.
    pub config: ExperimentConfig,
    pub problem: ScviProblem,
    pub schedule: StepsizeSchedule,
    pub probabilities: Vec<f64>,
    pub gap_method: Option<GapMethod>,
}

impl ResolvedExperiment {
    /// Solver settings for replication `rep`.
    pub fn solver_config(&self, rep: u64) -> SolverConfig {
        let s = &self.config.solver;
        match s.algorithm {
            Algorithm::Bsmp => SolverConfig::Bsmp(BsmpConfig {
                schedule: self.schedule,
                block_probs: s.block_probs.clone(),
                averaging: s.r,
                iterations: s.iterations,
                seed: self.config.seed,
                replication: rep,
                initial: s.initial.clone(),
                checkpoints: self.config.checkpoints.clone(),
            }),
            Algorithm::Smp => SolverConfig::Smp(SmpConfig {
                schedule: self.schedule,
                r: s.r.unwrap_or(0.0),
                iterations: s.iterations,
                seed: self.config.seed,
                replication: rep,
                initial: s.initial.clone(),
                checkpoints: self.config.checkpoints.clone(),
            }),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    /// Checks every requirement the solver theory places on the run, builds the instance
    /// and fixes `gamma0`. Violations are reported by name.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(config_error("name", "must be a nonempty file stem of [A-Za-z0-9_.-]"));
        }
        if self.replications == 0 {
            return Err(config_error("replications", "need at least one replication"));
        }
        if self.metrics.is_empty() {
            return Err(config_error("metrics", "no metric requested"));
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.metrics.iter().find(|m| !seen.insert(**m)) {
            return Err(config_error("metrics", format!("{} listed twice", m.name())));
        }
        if !(self.fit_from.is_finite() && self.fit_from >= 0.0) {
            return Err(config_error("fit_from", "must be a nonnegative number"));
        }

        let problem = self.problem.build().map_err(|e| match e {
            HarnessError::Solver(err) => config_error("problem", err.to_string()),
            other => other,
        })?;
        if let Some((i, b)) = problem
            .constants()
            .bounds
            .iter()
            .enumerate()
            .find(|(_, b)| !b.is_finite())
        {
            return Err(config_error("problem.bounds", format!("block {i} has unbounded set ({b})")));
        }

        let s = &self.solver;
        let d = problem.num_blocks();
        let probabilities = match &s.block_probs {
            None => vec![1.0 / d as f64; d],
            Some(p) => {
                validate_probabilities(p, d).map_err(|e| config_error("solver.block_probs", e.to_string()))?;
                if s.algorithm == Algorithm::Smp {
                    return Err(config_error("solver.block_probs", "SMP updates every block"));
                }
                p.clone()
            }
        };
        if let Some(r) = s.r {
            validate_exponent(r).map_err(|e| config_error("solver.r", e.to_string()))?;
        }
        let averaging = s.algorithm == Algorithm::Smp || s.r.is_some();
        if !averaging && s.schedule != ScheduleKind::Harmonic {
            return Err(config_error(
                "solver.schedule",
                "without averaging the stepsizes must be square summable but not summable; use harmonic",
            ));
        }
        for m in &self.metrics {
            if m.averaged() && !averaging {
                return Err(config_error(
                    "metrics",
                    format!("{} needs an averaging exponent r", m.name()),
                ));
            }
            if m.needs_solution() && problem.known_solution().is_none() {
                return Err(config_error("metrics", format!("{} needs a known solution", m.name())));
            }
            if m.needs_objective() && problem.objective().is_none() {
                return Err(config_error("metrics", format!("{} needs an objective", m.name())));
            }
        }

        let gamma0 = match s.gamma0 {
            Gamma0Spec::Value(g) => g,
            Gamma0Spec::Auto(_) => match s.schedule {
                ScheduleKind::Harmonic => auto_gamma0(&problem, Gamma0Rule::StronglyPseudoMonotone)
                    .map_err(|e| config_error("solver.gamma0", e.to_string()))?,
                ScheduleKind::InverseSqrt => auto_gamma0(&problem, Gamma0Rule::Convex { gamma: 1.0 })
                    .map_err(|e| config_error("solver.gamma0", e.to_string()))?,
                ScheduleKind::Constant => {
                    return Err(config_error("solver.gamma0", "no automatic rule for constant steps"))
                }
            },
        };
        if !(gamma0.is_finite() && gamma0 > 0.0) {
            return Err(config_error("solver.gamma0", format!("{gamma0} is not a positive stepsize")));
        }
        let schedule = match s.schedule {
            ScheduleKind::Harmonic => StepsizeSchedule::Harmonic { gamma0 },
            ScheduleKind::InverseSqrt => StepsizeSchedule::InverseSqrt { gamma0 },
            ScheduleKind::Constant => StepsizeSchedule::Constant { gamma: gamma0 },
        };
        if let InitialPoint::Given { .. } = s.initial {
            s.initial
                .resolve(&problem, &mut scvi::NoiseStream::new(0, 0))
                .map_err(|e| config_error("solver.initial", e.to_string()))?;
        }

        let wants_gap = self.metrics.iter().any(|m| matches!(m, Metric::Gap | Metric::AveragedGap));
        let gap_method = wants_gap.then(|| {
            self.gap_method
                .unwrap_or_else(|| scvi::metrics::default_gap_method(&problem))
        });

        let mut config = self.clone();
        config.solver.gamma0 = Gamma0Spec::Value(gamma0);
        if s.algorithm == Algorithm::Smp && s.r.is_none() {
            config.solver.r = Some(0.0);
        }
        config.gap_method = gap_method;
        Ok(ResolvedExperiment {
            config,
            problem,
            schedule,
            probabilities,
            gap_method,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_json() -> String {
        r#"{
            "name": "demo",
            "problem": {"generator": "strongly_monotone_affine", "blocks": 2, "block_size": 2,
                        "mu": 0.5, "l_bound": 2.0, "noise": 0.1, "seed": 3},
            "solver": {"algorithm": "bsmp", "schedule": "harmonic", "gamma0": "auto", "iterations": 50},
            "replications": 2,
            "seed": 11,
            "metrics": ["distance_sq", "lyapunov"]
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_resolves_auto_gamma0() {
        let c = ExperimentConfig::from_json(&sample_json()).unwrap();
        let r = c.resolve().unwrap();
        // 2 blocks, Euclidean, mu 0.5
        assert_eq!(r.schedule, StepsizeSchedule::Harmonic { gamma0: 4.0 });
        assert_eq!(r.config.solver.gamma0, Gamma0Spec::Value(4.0));
        let again = serde_json::to_string(&r.config).unwrap();
        assert_eq!(ExperimentConfig::from_json(&again).unwrap(), r.config);
    }

    fn violation(edit: impl Fn(&mut ExperimentConfig)) -> String {
        let mut c = ExperimentConfig::from_json(&sample_json()).unwrap();
        edit(&mut c);
        match c.resolve() {
            Err(HarnessError::Config { name, .. }) => name,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn named_violations() {
        assert_eq!(violation(|c| c.solver.gamma0 = Gamma0Spec::Value(-1.0)), "solver.gamma0");
        assert_eq!(violation(|c| c.solver.block_probs = Some(vec![0.7, 0.7])), "solver.block_probs");
        assert_eq!(violation(|c| c.solver.r = Some(1.0)), "solver.r");
        assert_eq!(violation(|c| c.solver.schedule = ScheduleKind::InverseSqrt), "solver.schedule");
        assert_eq!(violation(|c| c.metrics.push(Metric::ObjectiveGap)), "metrics");
        assert_eq!(violation(|c| c.metrics.push(Metric::AveragedGap)), "metrics");
        assert_eq!(violation(|c| c.replications = 0), "replications");
        assert_eq!(violation(|c| c.name = "a/b".into()), "name");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = sample_json().replace("\"seed\": 11", "\"seed\": 11, \"sed\": 1");
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(HarnessError::Config { .. })
        ));
    }
}
