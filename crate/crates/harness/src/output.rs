//! Trace and summary files. Every file carries the resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use scvi::ScviProblem;

use crate::config::ExperimentConfig;
use crate::error::{io_error, Result};
use crate::experiment::ExperimentResult;

pub const CSV_HEADER: &str = "run_id,replication,k,metric,value";

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// CSV text: a `# config: {...}` comment line with the resolved configuration, the
/// header, then one row per measurement.
pub fn render_csv(result: &ExperimentResult) -> Result<String> {
    let config = serde_json::to_string(&result.summary.config)?;
    let run_id = &result.summary.run_id;
    let mut out = String::with_capacity(64 * (result.records.len() + 2));
    writeln!(out, "# config: {config}").expect("writing to a String");
    writeln!(out, "{CSV_HEADER}").expect("writing to a String");
    for r in &result.records {
        writeln!(
            out,
            "{run_id},{},{},{},{}",
            r.replication,
            r.k,
            r.metric.name(),
            format_value(r.value)
        )
        .expect("writing to a String");
    }
    Ok(out)
}

#[derive(Serialize)]
struct ProblemFile<'a> {
    config: &'a ExperimentConfig,
    problem: &'a ScviProblem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub problem: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Writes `<run_id>.csv`, `<run_id>.summary.json` and `<run_id>.problem.json` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let stem = &result.summary.run_id;
    let paths = OutputPaths {
        csv: dir.join(format!("{stem}.csv")),
        summary: dir.join(format!("{stem}.summary.json")),
        problem: dir.join(format!("{stem}.problem.json")),
    };
    write(&paths.csv, &render_csv(result)?)?;
    write(&paths.summary, &serde_json::to_string_pretty(&result.summary)?)?;
    let problem = ProblemFile {
        config: &result.summary.config,
        problem: &result.resolved.problem,
    };
    write(&paths.problem, &serde_json::to_string_pretty(&problem)?)?;
    Ok(paths)
}
