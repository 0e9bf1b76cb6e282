use scvi_harness::acceptance::{a2_mse_bound, run_suite};
use scvi_harness::config::{Gamma0Spec, Metric};
use scvi_harness::{render_csv, run_experiment, write_outputs, ExperimentConfig, HarnessError};

fn config(iterations: usize, reps: usize) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "name": "smoke",
            "problem": {{"generator": "strongly_monotone_affine", "blocks": 3, "block_size": 2,
                         "mu": 0.5, "l_bound": 2.0, "noise": 0.2, "seed": 5}},
            "solver": {{"algorithm": "bsmp", "schedule": "harmonic", "gamma0": "auto",
                        "iterations": {iterations}}},
            "replications": {reps},
            "seed": 17,
            "metrics": ["distance_sq", "lyapunov", "gap", "residual"]
        }}"#
    );
    ExperimentConfig::from_json(&text).unwrap()
}

#[test]
fn zero_iterations_single_checkpoint() {
    let res = run_experiment(&config(0, 1)).unwrap();
    let csv = render_csv(&res).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config: "));
    assert_eq!(lines[1], "run_id,replication,k,metric,value");
    // one checkpoint, four metrics
    assert_eq!(lines.len(), 2 + 4);
    for row in &lines[2..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(&cols[..3], &["smoke", "0", "0"]);
        assert!(cols[4].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn identical_bytes_across_runs_and_thread_counts() {
    let c = config(400, 6);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| render_csv(&run_experiment(&c).unwrap()).unwrap());
    let b = four.install(|| render_csv(&run_experiment(&c).unwrap()).unwrap());
    let s1 = one.install(|| run_experiment(&c).unwrap().summary);
    let s4 = four.install(|| run_experiment(&c).unwrap().summary);
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&s1).unwrap(), serde_json::to_string(&s4).unwrap());
}

#[test]
fn rerun_from_embedded_config() {
    let res = run_experiment(&config(200, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_outputs(&res, dir.path()).unwrap();
    let csv = std::fs::read_to_string(&paths.csv).unwrap();
    let embedded = csv.lines().next().unwrap().strip_prefix("# config: ").unwrap();
    let again = ExperimentConfig::from_json(embedded).unwrap();
    assert_eq!(again.solver.gamma0, Gamma0Spec::Value(6.0));
    assert_eq!(render_csv(&run_experiment(&again).unwrap()).unwrap(), csv);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&paths.summary).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 17);
    assert!(summary["config"]["solver"]["gamma0"].is_number());
    let problem: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&paths.problem).unwrap()).unwrap();
    assert_eq!(problem["config"], summary["config"]);
    assert!(problem["problem"]["map"].is_object());
}

#[test]
fn summary_reports_bound_and_fit() {
    let mut c = config(3000, 8);
    c.metrics = vec![Metric::DistanceSq];
    let res = run_experiment(&c).unwrap();
    let m = res.summary.metric(Metric::DistanceSq).unwrap();
    let bounded: Vec<_> = m.points.iter().filter(|p| p.bound.is_some()).collect();
    assert!(!bounded.is_empty());
    assert!(bounded.iter().all(|p| p.k >= 2 && p.within_bound == Some(true)));
    assert!(m.fit.is_some());
    let counts: f64 = res.summary.mean_block_counts.iter().sum();
    assert_eq!(counts, 3000.0);
}

#[test]
fn config_errors_are_named() {
    let mut c = config(10, 1);
    c.metrics.push(Metric::AveragedObjectiveGap);
    match run_experiment(&c) {
        Err(HarnessError::Config { name, .. }) => assert_eq!(name, "metrics"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn halved_gamma0_fails_the_mse_criterion() {
    let out = a2_mse_bound(0.5);
    assert!(!out.passed);
    assert!(out.detail.contains("stepsize precondition"), "{}", out.detail);
}

#[test]
fn suite_is_idempotent() {
    let strip = |v: Vec<scvi_harness::acceptance::CriterionReport>| -> Vec<(String, bool, String)> {
        v.into_iter()
            .map(|r| (r.id.to_string(), r.passed, r.detail))
            .collect()
    };
    let a = strip(run_suite(|_| {}));
    let b = strip(run_suite(|_| {}));
    assert_eq!(a.len(), 10);
    assert_eq!(a, b);
}
