//! The acceptance suite: fixed-seed checks of the prox properties, the rate bounds, the
//! auxiliary inequalities and the convergence and uniqueness claims.

use std::time::Instant;

use serde::Serialize;

use scvi::geometry::{BlockGeometry, ComponentSet, Dgf};
use scvi::metrics::{
    one_step_recursion, rate_constants, verify_recursion_lemma, verify_stepsize_sums, RateInputs,
    SumStatus,
};
use scvi::problem::{
    certify_constants, certify_monotonicity, make_monotone_affine, make_nash_quadratic,
    make_strictly_pseudo_monotone, make_strongly_monotone_affine,
    LinearTerm, MonotoneAffineParams, MonotonicityTest, NashParams, Scaling, ScopParams, SetKind,
    Spectrum, StronglyMonotoneParams,
};
use scvi::solvers::{
    auto_gamma0, run_bsmp_observed, solve_deterministic, weighted_average_update, BsmpConfig,
    Checkpoints, Gamma0Rule, StepsizeSchedule,
};
use scvi::{BlockVector, NoiseStream, ScviProblem};

use crate::config::{
    Algorithm, AutoToken, ExperimentConfig, Gamma0Spec, Metric, ProblemSpec, ScheduleKind, SolverSpec,
};
use crate::experiment::{run_experiment, MetricSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    /// Deterministic description of what was measured.
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} {} {}: {} [{:.2} s of {} s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

/// Outcome of a check before timing is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

fn timed(
    id: &'static str,
    title: &'static str,
    budget_seconds: f64,
    f: impl FnOnce() -> Outcome,
) -> CriterionReport {
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64();
    let within = seconds <= budget_seconds;
    let detail = if within {
        out.detail
    } else {
        format!("{}; over the time budget", out.detail)
    };
    CriterionReport {
        id,
        title,
        passed: out.passed && within,
        detail,
        seconds,
        budget_seconds,
    }
}

// ---------------------------------------------------------------- A1

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest violation, relative to the magnitude of the terms, of the prox inequalities
/// on `samples` random triples.
pub fn prox_property_violation(geom: &BlockGeometry, samples: usize, seed: u64) -> scvi::Result<f64> {
    let mut s = NoiseStream::new(seed, 0x70726f78);
    let n = geom.dim();
    let mut worst = 0.0f64;
    let mut record = |lhs: f64, rhs: f64, scale: f64| {
        worst = worst.max((lhs - rhs) / scale.max(1.0));
    };
    for _ in 0..samples {
        let x = geom.sample_point(s.rng());
        let z = geom.sample_point(s.rng());
        let w = geom.sample_point(s.rng());
        let magnitude = 10f64.powf(-2.0 + 3.0 * s.uniform());
        let y: Vec<f64> = (0..n).map(|_| magnitude * s.standard_normal()).collect();
        let y2: Vec<f64> = (0..n).map(|_| magnitude * s.standard_normal()).collect();
        let p = geom.prox_map(&x, &y)?;
        let p2 = geom.prox_map(&x, &y2)?;
        let d_xz = geom.bregman_distance(&x, &z)?;
        let d_pz = geom.bregman_distance(&p, &z)?;
        let d_xp = geom.bregman_distance(&x, &p)?;
        let dist = geom.norm(&diff(&x, &z));

        // (a) quadratic sandwich
        record(0.5 * geom.mu_omega * dist * dist, d_xz, d_xz);
        record(d_xz, 0.5 * geom.l_omega * dist * dist, d_xz);
        // (b) three-point inequality for the prox output
        let yzp = dot(&y, &diff(&z, &p));
        record(d_pz, d_xz + yzp - d_xp, d_xz + yzp.abs() + d_xp);
        // (c) one-step descent with the dual norm
        let yzx = dot(&y, &diff(&z, &x));
        let dn = geom.dual_norm(&y)?;
        let quad = dn * dn / (2.0 * geom.mu_omega);
        record(d_pz, d_xz + yzx + quad, d_xz + yzx.abs() + quad);
        // (d) zero step is the identity
        let p0 = geom.prox_map(&x, &vec![0.0; n])?;
        let moved = p0.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        record(moved, 0.0, 1.0);
        // (e) nonexpansive in the dual argument
        let lhs = geom.norm(&diff(&p, &p2));
        let rhs = geom.dual_norm(&diff(&y, &y2))?;
        record(lhs, rhs, rhs);
        // (f) three-point identity, both directions
        let d_xw = geom.bregman_distance(&x, &w)?;
        let d_wz = geom.bregman_distance(&w, &z)?;
        let gw = geom.grad_omega(&w)?;
        let gx = geom.grad_omega(&x)?;
        let cross = dot(&diff(&gw, &gx), &diff(&z, &w));
        let scale = d_xz.abs() + d_xw.abs() + d_wz.abs() + cross.abs();
        record(d_xz, d_xw + d_wz + cross, scale);
        record(d_xw + d_wz + cross, d_xz, scale);
        // feasibility of the output
        if !geom.contains(&p, 1e-12) {
            record(1.0, 0.0, 1.0);
        }
    }
    Ok(worst)
}

pub fn a1_geometries() -> Vec<(&'static str, BlockGeometry, f64)> {
    vec![
        (
            "euclidean/box",
            BlockGeometry::euclidean(
                ComponentSet::new_box(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, 3.0]).expect("valid box"),
            ),
            1e-10,
        ),
        (
            "euclidean/ball",
            BlockGeometry::euclidean(ComponentSet::ball(vec![0.5, -0.3, 0.2], 1.5).expect("valid ball")),
            1e-10,
        ),
        (
            "euclidean/simplex",
            BlockGeometry::euclidean(ComponentSet::simplex(4).expect("valid simplex")),
            1e-10,
        ),
        (
            "entropy/simplex",
            BlockGeometry::new(ComponentSet::simplex(4).expect("valid simplex"), Dgf::NegativeEntropy)
                .expect("entropy on simplex"),
            1e-8,
        ),
    ]
}

pub fn a1_prox_properties() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (k, (name, geom, tol)) in a1_geometries().into_iter().enumerate() {
        match prox_property_violation(&geom, 1000, 100 + k as u64) {
            Ok(v) => {
                passed &= v <= tol;
                parts.push(format!("{name} worst {v:.1e} (tol {tol:.0e})"));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(passed, parts.join(", "))
}

// ---------------------------------------------------------------- A2

pub const A2_HALF_WIDTH: f64 = 0.1;

pub fn a2_config(gamma0_factor: f64) -> scvi::Result<ExperimentConfig> {
    let params = StronglyMonotoneParams {
        blocks: 8,
        block_size: 4,
        mu: 0.5,
        l_bound: 2.0,
        noise: 0.1,
        set: SetKind::Box { half_width: A2_HALF_WIDTH },
        seed: 2,
    };
    let problem = make_strongly_monotone_affine(&params)?;
    let gamma0 = auto_gamma0(&problem, Gamma0Rule::StronglyPseudoMonotone)? * gamma0_factor;
    let ks: Vec<usize> = (0..=8).map(|j| (100.0 * 10f64.powf(j as f64 / 4.0)).round() as usize).collect();
    Ok(ExperimentConfig {
        name: "a2_mse".into(),
        problem: ProblemSpec::StronglyMonotoneAffine(params),
        solver: SolverSpec {
            algorithm: Algorithm::Bsmp,
            schedule: ScheduleKind::Harmonic,
            gamma0: Gamma0Spec::Value(gamma0),
            r: None,
            block_probs: None,
            iterations: 10_000,
            initial: Default::default(),
        },
        replications: 100,
        seed: 20,
        checkpoints: Checkpoints::Explicit { ks },
        metrics: vec![Metric::DistanceSq],
        gap_method: None,
        fit_from: 100.0,
        output: None,
    })
}

fn bound_checks(m: &MetricSummary, ks: &[usize]) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &k in ks {
        match m.points.iter().find(|p| p.k == k) {
            Some(p) => match (p.bound, p.within_bound) {
                (Some(b), Some(w)) => {
                    ok &= w;
                    parts.push(format!(
                        "k={k}: {:.3e} ± {:.1e} vs bound {:.3e}",
                        p.mean, p.standard_error, b
                    ));
                }
                _ => {
                    ok = false;
                    parts.push(format!("k={k}: no bound applies"));
                }
            },
            None => {
                ok = false;
                parts.push(format!("k={k}: missing checkpoint"));
            }
        }
    }
    (ok, parts)
}

fn slope_check(m: &MetricSummary, lo: f64, hi: f64) -> (bool, String) {
    match &m.fit {
        Some(f) => (
            f.slope >= lo && f.slope <= hi,
            format!("slope {:.3} in [{lo}, {hi}]", f.slope),
        ),
        None => (false, format!("no fit: {}", m.fit_note.clone().unwrap_or_default())),
    }
}

/// The MSE bound rests on `gamma_0 = 2/alpha` with `alpha = 2 mu / (d max L_omega)`.
pub fn a2_mse_bound(gamma0_factor: f64) -> Outcome {
    let run = || -> crate::error::Result<Outcome> {
        let config = a2_config(gamma0_factor)?;
        let result = run_experiment(&config)?;
        let problem = &result.resolved.problem;
        let mu = problem.constants().mu.ok_or(scvi::ScviError::MissingConstant("mu"))?;
        let d = problem.num_blocks() as f64;
        let max_l = problem.geometries().iter().map(|g| g.l_omega).fold(0.0, f64::max);
        let alpha = 2.0 * mu / (d * max_l);
        let alpha_gamma = alpha * result.resolved.schedule.initial();
        if (alpha_gamma - 2.0).abs() > 1e-12 {
            return Ok(Outcome::new(
                false,
                format!("stepsize precondition violated: alpha gamma0 = {alpha_gamma}, the bound needs 2"),
            ));
        }
        let m = result.summary.metric(Metric::DistanceSq).expect("requested metric");
        let (bounds_ok, mut parts) = bound_checks(m, &[100, 1000, 10_000]);
        let (slope_ok, s) = slope_check(m, -1.3, -0.7);
        parts.push(s);
        Ok(Outcome::new(bounds_ok && slope_ok, parts.join("; ")))
    };
    run().unwrap_or_else(Outcome::error)
}

// ---------------------------------------------------------------- A3

pub const A3_MARGIN: f64 = 0.2;
pub const A3_NOISE: f64 = 3.0;

pub fn a3_config(r: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("a3_scop_r{r}"),
        problem: ProblemSpec::ScopQuadratic(ScopParams {
            blocks: 9,
            block_size: 3,
            spectrum: Spectrum::Uniform {
                min: 0.0,
                max: 1.0,
                zeros: 1,
            },
            linear: LinearTerm::VertexDominant { margin: A3_MARGIN },
            noise: A3_NOISE,
            set: SetKind::Box { half_width: 1.0 },
            seed: 3,
        }),
        solver: SolverSpec {
            algorithm: Algorithm::Bsmp,
            schedule: ScheduleKind::InverseSqrt,
            gamma0: Gamma0Spec::Auto(AutoToken::Auto),
            r: Some(r),
            block_probs: None,
            iterations: 16_384,
            initial: Default::default(),
        },
        replications: 40,
        seed: 30,
        checkpoints: Checkpoints::Explicit {
            ks: (0..=8).map(|j| 64 << j).collect(),
        },
        metrics: vec![Metric::AveragedObjectiveGap],
        gap_method: None,
        fit_from: 64.0,
        output: None,
    }
}

pub fn a3_objective_bound() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.0, -1.0, 0.5] {
        let res = match run_experiment(&a3_config(r)) {
            Ok(v) => v,
            Err(e) => return Outcome::error(e),
        };
        let m = res.summary.metric(Metric::AveragedObjectiveGap).expect("requested metric");
        let ks: Vec<usize> = (0..=8).map(|j| 64 << j).collect();
        let (b_ok, b_parts) = bound_checks(m, &ks);
        let (s_ok, s) = slope_check(m, -0.65, -0.35);
        ok &= b_ok && s_ok;
        let worst = m
            .points
            .iter()
            .filter_map(|p| p.bound.map(|b| (p.mean + 3.0 * p.standard_error) / b))
            .fold(0.0, f64::max);
        if !b_ok {
            parts.extend(b_parts);
        }
        parts.push(format!("r={r}: {s}, worst mean/bound {worst:.2e}"));
    }
    Outcome::new(ok, parts.join("; "))
}

// ---------------------------------------------------------------- A4

pub const A4_GAMMA0: f64 = 1.0;
pub const A4_NOISE: f64 = 1.0;

pub fn a4_config() -> ExperimentConfig {
    ExperimentConfig {
        name: "a4_gap".into(),
        problem: ProblemSpec::MonotoneAffine(MonotoneAffineParams {
            blocks: 3,
            block_size: 2,
            skew_norm: 1.0,
            psd_norm: 0.0,
            psd_zeros: 6,
            noise: A4_NOISE,
            set: SetKind::Box { half_width: 1.0 },
            seed: 4,
        }),
        solver: SolverSpec {
            algorithm: Algorithm::Smp,
            schedule: ScheduleKind::InverseSqrt,
            gamma0: Gamma0Spec::Value(A4_GAMMA0),
            r: Some(0.0),
            block_probs: None,
            iterations: 4096,
            initial: Default::default(),
        },
        replications: 50,
        seed: 40,
        checkpoints: Checkpoints::Explicit {
            ks: vec![256, 512, 1024, 2048, 4096],
        },
        metrics: vec![Metric::AveragedGap],
        gap_method: Some(scvi::metrics::GapMethod::AffineExact),
        fit_from: 256.0,
        output: None,
    }
}

pub fn a4_gap_bound() -> Outcome {
    let run = || -> crate::error::Result<Outcome> {
        let res = run_experiment(&a4_config())?;
        let p = &res.resolved.problem;
        let rates = rate_constants(
            p.constants(),
            p.geometries(),
            RateInputs {
                r: 0.0,
                gamma: 1.0,
                gamma0: A4_GAMMA0,
            },
        )?;
        let m = res.summary.metric(Metric::AveragedGap).expect("requested metric");
        let mut ok = true;
        let mut parts = Vec::new();
        for k in [256usize, 1024, 4096] {
            let Some(pt) = m.points.iter().find(|pt| pt.k == k) else {
                ok = false;
                parts.push(format!("K={k}: missing"));
                continue;
            };
            let rate = rates.gap_constant / (k as f64).sqrt();
            let within = pt.mean <= rate + 3.0 * pt.standard_error;
            let explicit = pt.within_bound.unwrap_or(false);
            ok &= within && explicit;
            parts.push(format!(
                "K={k}: {:.3e} ± {:.1e} vs M/sqrt(K) {:.3e}{}",
                pt.mean,
                pt.standard_error,
                rate,
                if explicit { "" } else { " (explicit bound violated)" }
            ));
        }
        let (s_ok, s) = slope_check(m, -0.65, -0.35);
        parts.push(s);
        Ok(Outcome::new(ok && s_ok, parts.join("; ")))
    };
    run().unwrap_or_else(Outcome::error)
}

// ---------------------------------------------------------------- A5, A6

pub fn a5_recursion_lemma() -> Outcome {
    let mut s = NoiseStream::new(5, 0);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let alpha = 0.05 + 2.0 * s.uniform();
        let beta = 10f64.powf(-2.0 + 4.0 * s.uniform());
        let e0 = 10.0 * s.uniform();
        match verify_recursion_lemma(alpha, beta, 2.0 / alpha, e0, 100_000) {
            Ok(r) => {
                worst = worst.max(r.tight_max_ratio.unwrap_or(f64::INFINITY));
                failures += usize::from(!r.passed);
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(
        failures == 0,
        format!("{failures} of 100 draws violate; worst e_k alpha^2 k / (8 beta) = {worst:.6}"),
    )
}

pub fn a6_stepsize_sums() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for r in [-1.0, -0.5, 0.0, 0.5, 0.9] {
        for k in [100usize, 10_000, 1_000_000] {
            for gamma0 in [0.5, 1.0, 3.0] {
                match verify_stepsize_sums(gamma0, r, k) {
                    Ok(rep) if rep.status == SumStatus::Pass => checked += 1,
                    Ok(rep) => failures.push(format!("r={r} K={k} gamma0={gamma0}: {:?}", rep.status)),
                    Err(e) => return Outcome::error(e),
                }
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} (r, K, gamma0) combinations pass")
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------- A7

pub fn a7_problem() -> scvi::Result<ScviProblem> {
    let base = make_strongly_monotone_affine(&StronglyMonotoneParams {
        blocks: 4,
        block_size: 2,
        mu: 0.5,
        l_bound: 2.0,
        noise: 0.05,
        set: SetKind::Box { half_width: 1.0 },
        seed: 7,
    })?;
    make_strictly_pseudo_monotone(&base, Scaling::default_for(8))
}

/// `max |x_k - x*|` over `(10^{j-1}, 10^j]` for each decade `j`.
pub fn decade_maxima(errors: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut lo = 1;
    let mut hi = 10;
    while hi < errors.len() {
        out.push(errors[lo..=hi].iter().copied().fold(0.0, f64::max));
        lo = hi + 1;
        hi *= 10;
    }
    out
}

pub fn a7_convergence() -> Outcome {
    let run = || -> scvi::Result<Outcome> {
        let p = a7_problem()?;
        let nonmono = certify_monotonicity(&p, MonotonicityTest::Monotone, 4000, 1)?;
        let strict = certify_monotonicity(&p, MonotonicityTest::StrictlyPseudoMonotone, 4000, 1)?;
        if nonmono.passed || !strict.passed {
            return Ok(Outcome::new(
                false,
                format!(
                    "instance not certified: monotone test passed = {}, strict pseudo test passed = {}",
                    nonmono.passed, strict.passed
                ),
            ));
        }
        let x_star = p.known_solution().expect("generator sets the solution").clone();
        // each block moves with probability 1/d, so gamma0 = d gives a per-block step of 1/k
        let gamma0 = p.num_blocks() as f64;
        let mut ok = true;
        let mut parts = vec![format!(
            "monotone test margin {:.2e}, gamma0 {gamma0}",
            nonmono.worst_margin
        )];
        for seed in 0..5u64 {
            let mut config = BsmpConfig::new(StepsizeSchedule::Harmonic { gamma0 }, 100_000, 70 + seed);
            config.checkpoints = Checkpoints::Explicit { ks: vec![] };
            let mut errors = Vec::with_capacity(100_001);
            run_bsmp_observed(&p, &config, &mut |_k: usize, x: &BlockVector| {
                let d: Vec<f64> = x.as_slice().iter().zip(x_star.as_slice()).map(|(a, b)| a - b).collect();
                errors.push(dot(&d, &d).sqrt());
            })?;
            let last = *errors.last().expect("observer sees every iterate");
            let maxima = decade_maxima(&errors);
            let decreasing = maxima.windows(2).all(|w| w[1] < w[0]);
            ok &= last < 5e-2 && decreasing;
            parts.push(format!(
                "seed {seed}: final {last:.2e}, decade maxima [{}]",
                maxima.iter().map(|m| format!("{m:.1e}")).collect::<Vec<_>>().join(", ")
            ));
        }
        Ok(Outcome::new(ok, parts.join("; ")))
    };
    run().unwrap_or_else(Outcome::error)
}

// ---------------------------------------------------------------- A8

pub fn a8_averaging_closed_form() -> Outcome {
    let mut s = NoiseStream::new(8, 0);
    let mut worst = 0.0f64;
    for r in [-1.0, 0.0, 0.5] {
        for _ in 0..100 {
            let len = 1 + (s.uniform() * 60.0) as usize;
            let gammas: Vec<f64> = (0..len).map(|_| 0.01 + 2.0 * s.uniform()).collect();
            let xs: Vec<BlockVector> = (0..len)
                .map(|_| {
                    BlockVector::from_blocks(vec![
                        (0..2).map(|_| s.standard_normal()).collect(),
                        (0..3).map(|_| s.standard_normal()).collect(),
                    ])
                    .expect("two nonempty blocks")
                })
                .collect();
            let mut weight = gammas[0].powf(r);
            let mut avg = xs[0].clone();
            for t in 1..len {
                match weighted_average_update(weight, &avg, &xs[t], gammas[t], r) {
                    Ok((w, a)) => {
                        weight = w;
                        avg = a;
                    }
                    Err(e) => return Outcome::error(e),
                }
            }
            let total: f64 = gammas.iter().map(|g| g.powf(r)).sum();
            for j in 0..avg.dim() {
                let direct: f64 = gammas
                    .iter()
                    .zip(&xs)
                    .map(|(g, x)| g.powf(r) * x.as_slice()[j])
                    .sum::<f64>()
                    / total;
                worst = worst.max((direct - avg.as_slice()[j]).abs());
            }
        }
    }
    Outcome::new(
        worst <= 1e-12,
        format!("300 sequences, worst deviation {worst:.1e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- A9

pub fn a9_instances() -> scvi::Result<Vec<ScviProblem>> {
    let strongly = |set, seed| StronglyMonotoneParams {
        blocks: 4,
        block_size: 2,
        mu: 0.5,
        l_bound: 2.0,
        noise: 0.2,
        set,
        seed,
    };
    Ok(vec![
        make_strongly_monotone_affine(&strongly(SetKind::Box { half_width: 1.0 }, 91))?,
        make_strongly_monotone_affine(&strongly(SetKind::Ball { radius: 1.0 }, 92))?,
        make_strongly_monotone_affine(&StronglyMonotoneParams {
            blocks: 3,
            block_size: 3,
            ..strongly(SetKind::Simplex, 93)
        })?,
        make_monotone_affine(&MonotoneAffineParams {
            blocks: 8,
            block_size: 1,
            skew_norm: 1.0,
            psd_norm: 0.5,
            psd_zeros: 2,
            noise: 0.1,
            set: SetKind::Box { half_width: 1.0 },
            seed: 94,
        })?,
        make_nash_quadratic(&NashParams {
            players: 3,
            block_size: 2,
            coupling: 0.3,
            noise: 0.1,
            set: SetKind::Box { half_width: 1.0 },
            seed: 95,
        })?,
        a7_problem()?,
    ])
}

pub fn a9_one_step_recursion() -> Outcome {
    let run = || -> scvi::Result<Outcome> {
        let mut s = NoiseStream::new(9, 0);
        let mut parts = Vec::new();
        let mut ok = true;
        for p in a9_instances()? {
            let cert = certify_constants(&p, 2000, 9)?;
            if !cert.passed {
                ok = false;
                parts.push(format!("{}: constants not certified", p.name()));
                continue;
            }
            let x_star = p.known_solution().expect("generated with a solution").clone();
            let d = p.num_blocks();
            let probs = vec![1.0 / d as f64; d];
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..20 {
                let x_k = p.sample_point(&mut s);
                let gamma = 10f64.powf(-2.0 + 2.5 * s.uniform());
                let r = one_step_recursion(&p, &x_k, &x_star, gamma, &probs)?;
                ok &= r.holds;
                worst = worst.max(r.expected_next - r.rhs);
            }
            parts.push(format!("{} (d={d}) worst lhs-rhs {worst:.2e}", p.name()));
        }
        Ok(Outcome::new(ok, parts.join("; ")))
    };
    run().unwrap_or_else(Outcome::error)
}

// ---------------------------------------------------------------- A10

/// Corner of every block in direction `sign * (1, ..., 1)`.
fn corner(p: &ScviProblem, sign: f64) -> scvi::Result<BlockVector> {
    let data = p
        .geometries()
        .iter()
        .flat_map(|g| g.set.linear_maximizer(&vec![sign; g.dim()]))
        .collect();
    p.vector(data)
}

pub fn a10_uniqueness() -> Outcome {
    let run = || -> scvi::Result<Outcome> {
        let mut parts = Vec::new();
        let mut ok = true;
        for seed in [7u64, 17, 27] {
            let base = make_strongly_monotone_affine(&StronglyMonotoneParams {
                blocks: 4,
                block_size: 2,
                mu: 0.5,
                l_bound: 2.0,
                noise: 0.05,
                set: SetKind::Box { half_width: 1.0 },
                seed,
            })?;
            let p = make_strictly_pseudo_monotone(&base, Scaling::default_for(8))?;
            let a = solve_deterministic(&p, &corner(&p, 1.0)?, 1e-12, 1_000_000)?;
            let b = solve_deterministic(&p, &corner(&p, -1.0)?, 1e-12, 1_000_000)?;
            let gap = a
                .x
                .as_slice()
                .iter()
                .zip(b.x.as_slice())
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            ok &= gap < 1e-6;
            parts.push(format!("seed {seed}: |x_a - x_b| = {gap:.1e}"));
        }
        Ok(Outcome::new(ok, parts.join("; ")))
    };
    run().unwrap_or_else(Outcome::error)
}

// ---------------------------------------------------------------- suite

pub fn run_suite(mut on_report: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    let criteria: Vec<(&'static str, &'static str, f64, fn() -> Outcome)> = vec![
        ("A1", "prox properties", 5.0, a1_prox_properties),
        ("A2", "MSE bound under strong monotonicity", 60.0, || a2_mse_bound(1.0)),
        ("A3", "averaged objective bound", 120.0, a3_objective_bound),
        ("A4", "averaged gap bound", 120.0, a4_gap_bound),
        ("A5", "recursion lemma", 5.0, a5_recursion_lemma),
        ("A6", "stepsize sums", 5.0, a6_stepsize_sums),
        ("A7", "convergence on a non-monotone instance", 60.0, a7_convergence),
        ("A8", "averaging closed form", 2.0, a8_averaging_closed_form),
        ("A9", "one-step Lyapunov recursion", 10.0, a9_one_step_recursion),
        ("A10", "uniqueness", 10.0, a10_uniqueness),
    ];
    criteria
        .into_iter()
        .map(|(id, title, budget, f)| {
            let r = timed(id, title, budget, f);
            on_report(&r);
            r
        })
        .collect()
}
