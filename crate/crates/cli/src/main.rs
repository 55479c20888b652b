use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gpmmc::harness::{compare_pdfs, read_pdf, run_experiment, write_outputs, RunConfig};

/// Output-PDF estimation with multicanonical Monte Carlo and GP surrogates.
#[derive(Debug, Parser)]
#[command(name = "gpmmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record every chain step in `steps.csv`.
        #[arg(long)]
        log_steps: bool,
    },
    /// Per-bin relative errors of a candidate PDF against a baseline.
    Compare {
        /// Run directory or pdf.csv.
        baseline: PathBuf,
        /// Run directory or pdf.csv.
        candidate: PathBuf,
    },
    /// Moments of a stored PDF.
    Moments { pdf: PathBuf },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, log_steps } => run(&config, seed, out, log_steps),
        Command::Compare { baseline, candidate } => {
            let mut report = compare_pdfs(&read_pdf(&baseline)?, &read_pdf(&candidate)?)?;
            report.baseline_true_evals = true_evals(&baseline)?;
            report.candidate_true_evals = true_evals(&candidate)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Moments { pdf } => {
            let moments = read_pdf(&pdf)?.moments()?;
            println!("{}", serde_json::to_string_pretty(&moments)?);
            Ok(())
        }
    }
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, log_steps: bool) -> Result<()> {
    let mut cfg = RunConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .context("no output directory: pass --out or set `output` in the config")?;
    let outcome = run_experiment(&cfg, log_steps)?;
    write_outputs(&outcome, &dir).with_context(|| format!("writing {}", dir.display()))?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    Ok(())
}

/// `true_evals` from the `summary.json` beside a PDF, when there is one.
fn true_evals(path: &Path) -> Result<Option<u64>> {
    let dir = if path.is_dir() { path } else { path.parent().unwrap_or(Path::new(".")) };
    let summary = dir.join("summary.json");
    if !summary.exists() {
        return Ok(None);
    }
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary)?)
        .with_context(|| format!("parsing {}", summary.display()))?;
    Ok(value.get("true_evals").and_then(serde_json::Value::as_u64))
}
