//! Estimating the full probability density of a scalar performance variable
//! `y = g(x)` of random inputs `x` with multicanonical Monte Carlo (MMC),
//! optionally replacing most model evaluations with adaptively refined local
//! Gaussian-process surrogates (GP-MMC).
//!
//! The crate is organized bottom-up:
//!
//! - [`problem`]: performance models, prior densities and the evaluation ledger.
//! - [`binning`]: the output partition and histograms.
//! - [`mcmc`]: random-walk Metropolis–Hastings and the step-kernel abstraction.
//! - [`mmc`]: weight tables, the biasing density and the multicanonical iteration.
//! - [`gp`]: the evaluation store, local quadratic-mean GP regression and
//!   hyper-parameter calibration.
//! - [`surrogate`]: the surrogate-accelerated step kernel with misassignment
//!   based refinement.
//! - [`benchmarks`]: the min-distance, cantilever-beam and random-field Poisson
//!   models.
//! - [`harness`]: configuration-driven experiments, result files and PDF
//!   comparison.

pub mod benchmarks;
pub mod binning;
pub mod error;
pub mod gp;
pub mod harness;
pub mod mcmc;
pub mod mmc;
pub mod problem;
pub mod rng;
pub mod surrogate;

pub use binning::{Binning, Histogram};
pub use error::{Error, Result};
pub use problem::{EvalLedger, InputPoint, LedgerSnapshot, PerformanceModel};
