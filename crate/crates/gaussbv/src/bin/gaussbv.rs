//! Experiment launcher: one experiment per invocation, driven by a TOML
//! config, emitting a versioned CSV and a JSON summary.
//!
//! Exit status: 0 when every requested check passes, 1 when the run
//! completes but a check fails, 2 on a config parse or validation error,
//! 3 on a numerical breakdown.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaussbv::config::{Experiment, ExperimentConfig};
use gaussbv::error::GaussBvError;
use gaussbv::runner;

#[derive(Parser)]
#[command(name = "gaussbv", version, about = "Semigroup BV estimators for weighted Gaussian measures on convex domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write CSV + JSON outputs.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
        /// Cap the worker-thread count (results are identical for any cap).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory, overriding the config and the GAUSSBV_OUT
        /// environment variable.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in experiments with one-line summaries.
    ListExperiments,
    /// Parse and validate a config file, printing its digest.
    Validate {
        /// Path to the TOML experiment config.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(pass) => {
            if pass {
                ExitCode::from(0)
            } else {
                eprintln!("gaussbv: completed with failing checks");
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("gaussbv: error: {err}");
            match err {
                GaussBvError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<bool, GaussBvError> {
    match command {
        Command::Run { config, threads, out } => run_command(&config, threads, out),
        Command::ListExperiments => {
            for exp in Experiment::ALL {
                println!("{:<16} {}", exp.name(), exp.summary());
            }
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            println!("ok: {} digest {}", cfg.experiment.name(), cfg.digest());
            Ok(true)
        }
    }
}

/// Read a config file, folding unreadable paths into the config error
/// class so they share exit status 2 with parse failures.
fn load_config(path: &PathBuf) -> Result<ExperimentConfig, GaussBvError> {
    ExperimentConfig::from_path(path).map_err(|err| match err {
        GaussBvError::Io(e) => GaussBvError::Config {
            field: "config".to_string(),
            reason: format!("{}: {e}", path.display()),
        },
        other => other,
    })
}

fn run_command(
    config: &PathBuf,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> Result<bool, GaussBvError> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out.or_else(|| std::env::var_os("GAUSSBV_OUT").map(PathBuf::from)) {
        cfg.output = dir;
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| GaussBvError::InvalidParameter {
                name: "threads",
                reason: e.to_string(),
            })?;
    }
    let outcome = runner::run(&cfg)?;
    let summary = &outcome.summary;
    println!(
        "{} seed={} digest={} rows={}",
        summary.experiment,
        summary.seed,
        summary.digest,
        summary.rows.len()
    );
    for check in &summary.checks {
        println!(
            "  [{}] {} residual={:+.3e} tolerance={:.3e}",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.residual,
            check.tolerance
        );
    }
    if let Some(oracle) = &summary.oracle {
        println!(
            "  [{}] oracle {:.6} vs estimate {:.6}",
            if oracle.within_tolerance { "pass" } else { "FAIL" },
            oracle.oracle.value,
            oracle.estimate.value
        );
    }
    if let Some(flag) = summary.divergence_flag {
        println!("  divergence flag: {flag}");
    }
    println!("wrote {}", outcome.csv_path.display());
    println!("wrote {}", outcome.json_path.display());
    Ok(summary.pass)
}
