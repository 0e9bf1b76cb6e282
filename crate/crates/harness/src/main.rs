use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scvi::problem::{certify_constants, certify_monotonicity};
use scvi::ScviProblem;
use scvi_harness::acceptance::run_suite;
use scvi_harness::{run_experiment, write_outputs, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "scvi", about = "Stochastic Cartesian VI solvers: experiments and acceptance checks")]
struct Cli {
    /// Print only errors and failures.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, then `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Run the acceptance suite.
    Accept,
    /// Certify the monotonicity class and constants of an instance document.
    CheckProblem {
        instance: PathBuf,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, reps: Option<usize>, quiet: bool) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(r) = reps {
        config.replications = r;
    }
    let dir = out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = run_experiment(&config)?;
    let paths = write_outputs(&result, &dir)?;
    if !quiet {
        for m in &result.summary.metrics {
            let slope = m
                .fit
                .map(|f| format!("slope {:.3}", f.slope))
                .unwrap_or_else(|| "no fit".into());
            let last = m.points.last();
            println!(
                "{}: {slope}; final mean {}",
                m.metric.name(),
                last.map(|p| format!("{:.4e} at k={}", p.mean, p.k)).unwrap_or_default()
            );
        }
        println!("wrote {}", paths.csv.display());
        println!("wrote {}", paths.summary.display());
        println!("wrote {}", paths.problem.display());
    }
    Ok(())
}

fn check_problem(path: PathBuf, samples: usize, seed: u64) -> Result<bool, HarnessError> {
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    // a bare instance document, or a problem file written by `run`
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let doc = match value.get("problem") {
        Some(inner) if value.get("config").is_some() => inner.clone(),
        _ => value,
    };
    let problem: ScviProblem = serde_json::from_value(doc).map_err(|e| HarnessError::Config {
        name: "instance".into(),
        reason: e.to_string(),
    })?;
    let mono = certify_monotonicity(&problem, problem.class().default_test(), samples, seed)?;
    let consts = certify_constants(&problem, samples, seed)?;
    let report = serde_json::json!({ "monotonicity": mono, "constants": consts });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(mono.passed && consts.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let outcome = match cli.command {
        Command::Run { config, out, seed, reps } => run(config, out, seed, reps, quiet).map(|_| true),
        Command::Accept => {
            let reports = run_suite(|r| {
                if !quiet || !r.passed {
                    println!("{}", r.line());
                }
            });
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::CheckProblem { instance, samples, seed } => check_problem(instance, samples, seed),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ HarnessError::Config { .. }) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
