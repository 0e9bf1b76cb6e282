use std::process::Command;

fn scvi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scvi"))
}

const CONFIG: &str = r#"{
    "name": "cli",
    "problem": {"generator": "monotone_affine", "blocks": 2, "block_size": 2, "skew_norm": 1.0,
                "psd_norm": 0.5, "noise": 0.1, "seed": 1},
    "solver": {"algorithm": "smp", "schedule": "inverse_sqrt", "gamma0": 0.5, "iterations": 64},
    "replications": 3,
    "seed": 2,
    "metrics": ["averaged_gap", "residual"]
}"#;

#[test]
fn run_writes_outputs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = scvi()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9", "--reps", "2", "--quiet"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("cli.csv")).unwrap();
    assert!(csv.contains("\"seed\":9"));
    assert!(csv.contains("\"replications\":2"));
    assert!(!csv.contains("cli,2,"));

    let check = scvi()
        .args(["check-problem", out.join("cli.problem.json").to_str().unwrap(), "--samples", "500"])
        .output()
        .unwrap();
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stdout));
    let report: serde_json::Value = serde_json::from_slice(&check.stdout).unwrap();
    assert_eq!(report["monotonicity"]["passed"], true);
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, CONFIG.replace("\"gamma0\": 0.5", "\"gamma0\": -0.5")).unwrap();
    let out = scvi().args(["run", cfg.to_str().unwrap(), "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.gamma0"));
}
