//! `invexopt`: run, compare and verify invex descent experiments.

mod config;
mod error;
mod experiment;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{ExperimentConfig, ProblemKind};
use error::CliError;
use experiment::{create_dir, run_into, write_file, RunReport};

#[derive(Parser)]
#[command(name = "invexopt", version, about = "Invex gradient descent experiments")]
struct Cli {
    /// Output directory; overrides `output_path` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run two configurations that differ only in algorithm.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
    },
    /// Run the assumption probes for one problem family.
    Verify {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const DEFAULT_OUTPUT: &str = "invexopt-out";

fn output_dir(flag: Option<&Path>, config: Option<&ExperimentConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.output_path.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

#[derive(Serialize)]
struct SideSummary {
    algorithm: config::Algorithm,
    status: invexopt::Status,
    final_objective: f64,
    iterations_to_threshold: Option<usize>,
}

#[derive(Serialize)]
struct CompareReport {
    problem: &'static str,
    seed: u64,
    /// The configured target, or the larger of the two final objectives.
    threshold: f64,
    a: SideSummary,
    b: SideSummary,
    /// `a` iterations over `b` iterations, when both reached the threshold.
    ratio: Option<f64>,
    /// Sides that ended diverged or at the iteration cap.
    flagged: Vec<&'static str>,
}

fn summary(report: &RunReport, threshold: f64, trace: &str) -> SideSummary {
    // The threshold is decided after both runs, so read it off the trace.
    let hit = trace.lines().skip(1).find_map(|line| {
        let mut cols = line.split(',');
        let iter: usize = cols.next()?.parse().ok()?;
        let obj: f64 = cols.next()?.parse().ok()?;
        (obj <= threshold).then_some(iter)
    });
    SideSummary { algorithm: report.algorithm, status: report.status, final_objective: report.final_objective, iterations_to_threshold: hit }
}

fn run(flag: Option<&Path>, path: &Path) -> Result<bool, CliError> {
    let config = ExperimentConfig::load(path)?;
    let dir = output_dir(flag, Some(&config));
    let report = run_into(&config, &dir)?;
    println!(
        "{} {:?}: {} after {} iterations, objective {:.6e} -> {}",
        report.problem,
        report.algorithm,
        report.status,
        report.iterations,
        report.final_objective,
        dir.display()
    );
    Ok(!report.solver_failed())
}

fn compare(flag: Option<&Path>, path_a: &Path, path_b: &Path) -> Result<bool, CliError> {
    let a = ExperimentConfig::load(path_a)?;
    let b = ExperimentConfig::load(path_b)?;
    a.same_experiment(&b)?;
    let dir = output_dir(flag, Some(&a));
    let ra = run_into(&a, &dir.join("a"))?;
    let rb = run_into(&b, &dir.join("b"))?;
    let threshold = a.objective_target.unwrap_or(ra.final_objective.max(rb.final_objective));
    let read = |side: &str| {
        let path = dir.join(side).join("trace.csv");
        std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
    };
    let sa = summary(&ra, threshold, &read("a")?);
    let sb = summary(&rb, threshold, &read("b")?);
    let ratio = match (sa.iterations_to_threshold, sb.iterations_to_threshold) {
        (Some(x), Some(y)) if y > 0 => Some(x as f64 / y as f64),
        _ => None,
    };
    let flagged = [("a", &sa), ("b", &sb)]
        .into_iter()
        .filter(|(_, s)| matches!(s.status, invexopt::Status::Diverged | invexopt::Status::MaxIter))
        .map(|(name, _)| name)
        .collect();
    let report = CompareReport { problem: a.problem.name(), seed: a.seed, threshold, a: sa, b: sb, ratio, flagged };
    write_file(&dir, "compare.json", &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    println!(
        "threshold {threshold:.6e}: a reaches it at {:?}, b at {:?} -> {}",
        report.a.iterations_to_threshold,
        report.b.iterations_to_threshold,
        dir.display()
    );
    Ok(!ra.solver_failed() && !rb.solver_failed())
}

fn verify(flag: Option<&Path>, problem: &str, seed: u64) -> Result<bool, CliError> {
    let kind = ProblemKind::parse(problem).ok_or_else(|| CliError::Config(format!("unknown problem `{problem}`")))?;
    let report = verify::verify_suite(kind, seed)?;
    let dir = output_dir(flag, None);
    create_dir(&dir)?;
    write_file(&dir, "verify.json", &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    println!(
        "{problem}: {} (invexity worst {:.2e}, fd {:.2e}) -> {}",
        if report.passed { "all probes passed" } else { "probe failures" },
        report.invexity.worst_residual,
        report.gradient_fd.max_relative_error,
        dir.display()
    );
    Ok(report.passed)
}

fn main() -> ExitCode {
    invexopt::scalar::apply_thread_env();
    let cli = Cli::parse();
    let flag = cli.output.as_deref();
    let result = match &cli.command {
        Command::Run { config } => run(flag, config),
        Command::Compare { config_a, config_b } => compare(flag, config_a, config_b),
        Command::Verify { problem, seed } => verify(flag, problem, *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("invexopt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
