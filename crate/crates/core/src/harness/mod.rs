//! Configuration-driven experiments and their result files.
//!
//! A run is described by a flat TOML [`RunConfig`]; [`run_experiment`]
//! executes plain Monte Carlo, MMC or GP-MMC on the configured model and
//! [`write_outputs`] persists the histograms, final PDF, summary, optional step
//! log and evaluation store. [`compare_pdfs`] computes per-bin relative errors
//! of one PDF against a baseline.

mod compare;
mod config;
mod experiment;

pub use compare::{compare_pdfs, compare_pdfs_above, read_pdf, write_pdf, BinError, ComparisonReport, PdfTable};
pub use config::{Method, RunConfig};
pub use experiment::{
    build_model, resolve_binning, run_experiment, write_outputs, ExperimentOutcome, IterationSummary, StepLog,
    Summary,
};
