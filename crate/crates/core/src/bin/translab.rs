//! Experiment runner CLI: `translab run <config.json>` executes one
//! experiment and writes deterministic reports; `translab list-catalog`
//! prints the built-in data expressions and interface families.
//!
//! Exit status: 0 when every asserted inequality passed, 2 on assertion
//! failure, 1 on configuration or runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use translab::experiment::{run_to_dir, ExperimentConfig};

#[derive(Parser)]
#[command(name = "translab", version, about = "Finite-difference laboratory for parabolic transmission problems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a JSON config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Output directory for report.json / cases.csv / meta.json
        /// (defaults to out/<experiment name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for case-level parallelism (0 = rayon default).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Override the refinement list with a single mesh width.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Print the built-in expression ids and psi families.
    ListCatalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::ListCatalog => {
            print!("{}", translab::catalog::render_catalog());
            ExitCode::SUCCESS
        }
        Cmd::Run { config, out, jobs, h } => match run(config, out, jobs, h) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, jobs: usize, h: Option<f64>) -> translab::Result<bool> {
    let text = std::fs::read_to_string(&config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(h) = h {
        cfg.refinements = vec![h];
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let outcome = run_to_dir(&cfg, &out_dir, jobs)?;
    for a in &outcome.report.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    println!(
        "{}: {} assertions, report at {}",
        if outcome.passed { "ok" } else { "FAILED" },
        outcome.report.assertions.len(),
        out_dir.join("report.json").display()
    );
    Ok(outcome.passed)
}
