use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::compare::write_pdf;
use super::config::{Method, RunConfig};
use crate::benchmarks::{Beam, MinDistance, PoissonKl, PoissonKlSpec, REPRODUCING_E_MEAN};
use crate::binning::Binning;
use crate::error::{Error, Result};
use crate::gp::{calibrate_lengthscales, EvaluationStore, KernelParams};
use crate::mcmc::{ChainState, ExactKernel, Proposal, RefinementCause, StepRecord};
use crate::mmc::{
    estimate_moments, estimate_pdf, estimate_probabilities, run_mmc_observed, IterationRecord, MmcConfig, Moments,
    StepObserver, WeightTable,
};
use crate::problem::{evaluate, sample_prior, EvalLedger, InputPoint, PerformanceModel};
use crate::rng;
use crate::surrogate::{SurrogateKernel, SurrogateKernelConfig, SurrogateStats};

/// Default number of pilot draws used to size the output range.
const DEFAULT_PILOT_SAMPLES: usize = 1000;
/// Fraction of the pilot range added on each side.
const PILOT_PADDING: f64 = 0.1;
const DEFAULT_PROPOSAL_SCALE: f64 = 0.5;

/// One line of the step log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLog {
    /// Step index over the whole run, burn-in included.
    pub step: u64,
    pub used_surrogate: bool,
    pub beta: Option<f64>,
    pub refined: bool,
    pub accepted: bool,
    pub iteration: usize,
    pub cause: Option<RefinementCause>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub flatness: f64,
    /// `None` for plain Monte Carlo.
    pub acceptance_rate: Option<f64>,
    pub in_range: u64,
    pub overflow_low: u64,
    pub overflow_high: u64,
}

/// Contents of `summary.json`. Everything here is determined by the
/// configuration, so repeated runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub method: Method,
    pub model: String,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub true_evals: u64,
    pub surrogate_evals: u64,
    /// Pilot evaluations used to size the output range (not part of the method's cost).
    pub pilot_evals: u64,
    pub initial_design: usize,
    pub start_evaluations: u64,
    /// `1 / start_evaluations`, a rough in-range prior mass for MMC runs.
    pub rho: Option<f64>,
    pub lengthscales: Option<Vec<f64>>,
    pub refinements: Option<SurrogateStats>,
    pub store_size: Option<usize>,
    pub iterations: Vec<IterationSummary>,
    pub moments: Moments,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: RunConfig,
    pub binning: Binning,
    /// Per-iteration weights and histograms; plain Monte Carlo has one entry
    /// with unit weights.
    pub iterations: Vec<IterationRecord>,
    pub pdf: Vec<f64>,
    pub summary: Summary,
    pub steps: Option<Vec<StepLog>>,
    pub store: Option<EvaluationStore>,
    pub runtime_seconds: f64,
}

pub fn build_model(cfg: &RunConfig) -> Result<Box<dyn PerformanceModel>> {
    match cfg.model.as_str() {
        "min_distance" => Ok(Box::new(match (&cfg.centers, cfg.dimension) {
            (Some([x1, x2]), _) => MinDistance::new(x1.clone(), x2.clone())?,
            (None, Some(d)) => MinDistance::diagonal(d)?,
            (None, None) => MinDistance::planar(),
        })),
        "beam" => Ok(Box::new(Beam::new(cfg.e_mean.unwrap_or(REPRODUCING_E_MEAN))?)),
        "poisson_kl" => {
            let defaults = PoissonKlSpec::default();
            let spec = PoissonKlSpec {
                cells: cfg.cells.unwrap_or(defaults.cells),
                modes: cfg.modes.unwrap_or(defaults.modes),
                corr_length: cfg.corr_length.unwrap_or(defaults.corr_length),
                a0: cfg.a0.unwrap_or(defaults.a0),
                ..defaults
            };
            Ok(Box::new(match &cfg.kl_cache {
                Some(dir) => PoissonKl::cached(spec, dir)?,
                None => PoissonKl::new(spec)?,
            }))
        }
        other => Err(Error::Config(format!("unknown model {other:?}"))),
    }
}

/// The configured output range, or one sized from a pilot sample. Returns the
/// binning and the number of pilot evaluations.
pub fn resolve_binning(cfg: &RunConfig, model: &dyn PerformanceModel) -> Result<(Binning, u64)> {
    if let (Some(lo), Some(hi)) = (cfg.lo, cfg.hi) {
        return Ok((Binning::new(lo, hi, cfg.bins)?, 0));
    }
    let n = cfg.pilot_samples.unwrap_or(DEFAULT_PILOT_SAMPLES);
    let ledger = EvalLedger::new();
    let mut pilot = rng::stream(cfg.seed, rng::PILOT_STREAM);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in sample_prior(model, &mut pilot, n)? {
        let y = evaluate(model, &x, &ledger)?;
        lo = lo.min(y);
        hi = hi.max(y);
    }
    let pad = PILOT_PADDING * (hi - lo).max(f64::EPSILON * hi.abs().max(1.0));
    Ok((Binning::new(lo - pad, hi + pad, cfg.bins)?, ledger.true_evals()))
}

fn mmc_config(cfg: &RunConfig) -> MmcConfig {
    MmcConfig {
        iterations: cfg.iterations.unwrap_or_default(),
        samples_per_iteration: cfg.samples_per_iteration.unwrap_or_default(),
        proposal_scale: cfg.proposal_scale.clone().unwrap_or_else(|| vec![DEFAULT_PROPOSAL_SCALE]),
        burn_in: cfg.burn_in,
        seed: cfg.seed,
    }
}

/// Collects step records into the log when enabled.
struct StepCollector {
    steps: Option<Vec<StepLog>>,
    counter: u64,
}

impl StepObserver for StepCollector {
    fn observe(&mut self, iteration: usize, _step: usize, _tallied: bool, record: &StepRecord, _state: &ChainState) {
        if let Some(steps) = self.steps.as_mut() {
            steps.push(StepLog {
                step: self.counter,
                used_surrogate: record.used_surrogate,
                beta: record.beta,
                refined: record.refined,
                accepted: record.accepted,
                iteration,
                cause: record.cause,
            });
        }
        self.counter += 1;
    }
}

pub fn run_experiment(cfg: &RunConfig, log_steps: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let model = build_model(cfg)?;
    let model = model.as_ref();
    let (binning, pilot_evals) = resolve_binning(cfg, model)?;
    let ledger = EvalLedger::new();

    let mut summary = Summary {
        method: cfg.method,
        model: model.name().to_string(),
        seed: cfg.seed,
        lo: binning.lo(),
        hi: binning.hi(),
        bins: binning.len(),
        true_evals: 0,
        surrogate_evals: 0,
        pilot_evals,
        initial_design: 0,
        start_evaluations: 0,
        rho: None,
        lengthscales: None,
        refinements: None,
        store_size: None,
        iterations: Vec::new(),
        moments: Moments { mean: 0.0, variance: 0.0, central3: 0.0, central4: 0.0, central5: 0.0 },
    };
    let mut collector = StepCollector { steps: log_steps.then(Vec::new), counter: 0 };
    let mut store = None;

    let (iterations, pdf) = match cfg.method {
        Method::Mc => {
            let n = cfg.samples.unwrap_or_default();
            let mut r = rng::stream(cfg.seed, rng::MONTE_CARLO_STREAM);
            let mut histogram = crate::binning::Histogram::new(binning.len());
            for _ in 0..n {
                let x = model.draw_prior(&mut r);
                let y = evaluate(model, &x, &ledger)?;
                histogram.record(binning.bin_index(y)?, y < binning.lo());
            }
            let weights = WeightTable::uniform(binning.len(), 1.0)?;
            let probabilities = estimate_probabilities(&weights, &histogram)?;
            let pdf = estimate_pdf(&weights, &histogram, &binning)?;
            let record = IterationRecord {
                weights,
                flatness: histogram.flatness(),
                acceptance_rate: 1.0,
                histogram,
                probabilities,
            };
            (vec![record], pdf)
        }
        Method::Mmc => {
            let mcfg = mmc_config(cfg);
            let proposal = Proposal::broadcast(&mcfg.proposal_scale, model.dimension())?;
            let mut kernel = ExactKernel::new(model, proposal)?;
            let result = run_mmc_observed(model, &binning, &mcfg, &mut kernel, &ledger, Some(&mut collector))?;
            summary.start_evaluations = result.start_evaluations;
            summary.rho = Some(result.rho);
            (result.iterations, result.pdf)
        }
        Method::Gpmmc => {
            let mcfg = mmc_config(cfg);
            let proposal = Proposal::broadcast(&mcfg.proposal_scale, model.dimension())?;
            let n0 = cfg.initial_design.unwrap_or_default();
            let exponent = cfg.kernel_exponent.unwrap_or(1);

            let mut design_rng = rng::stream(cfg.seed, rng::DESIGN_STREAM);
            let mut initial = EvaluationStore::new(model.dimension());
            let mut data: Vec<(InputPoint, f64)> = Vec::with_capacity(n0);
            for x in sample_prior(model, &mut design_rng, n0)? {
                let y = evaluate(model, &x, &ledger)?;
                initial.insert(x.clone(), y)?;
                data.push((x, y));
            }
            let lengths = calibrate_lengthscales(&data, exponent)?;
            let kernel_params = KernelParams::new(1.0, lengths.clone(), exponent)?;
            let scfg = SurrogateKernelConfig {
                gamma: cfg.gamma.unwrap_or_default(),
                beta_max: cfg.beta_max.unwrap_or_default(),
                proposal,
                kernel: kernel_params,
            };
            let mut kernel = SurrogateKernel::new(model, binning, scfg, initial)?;
            let result = run_mmc_observed(model, &binning, &mcfg, &mut kernel, &ledger, Some(&mut collector))?;
            summary.initial_design = n0;
            summary.start_evaluations = result.start_evaluations;
            summary.rho = Some(result.rho);
            summary.lengthscales = Some(lengths);
            summary.refinements = Some(kernel.stats());
            let final_store = kernel.into_store();
            summary.store_size = Some(final_store.len());
            store = Some(final_store);
            (result.iterations, result.pdf)
        }
    };

    summary.true_evals = ledger.true_evals();
    summary.surrogate_evals = ledger.surrogate_evals();
    summary.moments = estimate_moments(&pdf, &binning)?;
    summary.iterations = iterations
        .iter()
        .enumerate()
        .map(|(k, it)| IterationSummary {
            iteration: k,
            flatness: it.flatness,
            acceptance_rate: (cfg.method != Method::Mc).then_some(it.acceptance_rate),
            in_range: it.histogram.in_range(),
            overflow_low: it.histogram.overflow_low,
            overflow_high: it.histogram.overflow_high,
        })
        .collect();

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        binning,
        iterations,
        pdf,
        summary,
        steps: collector.steps,
        store,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

fn io_csv(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_histograms(outcome: &ExperimentOutcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["iter", "bin", "center", "lo", "hi", "count", "H_hat", "theta", "P_i", "pdf"]).map_err(io_csv)?;
    let b = &outcome.binning;
    for (k, it) in outcome.iterations.iter().enumerate() {
        let total = it.histogram.total as f64;
        for i in 0..b.len() {
            let count = it.histogram.counts[i];
            let p = it.probabilities[i];
            w.write_record([
                k.to_string(),
                i.to_string(),
                b.center(i).to_string(),
                b.lower_edge(i).to_string(),
                b.upper_edge(i).to_string(),
                count.to_string(),
                (count as f64 / total).to_string(),
                it.weights.theta()[i].to_string(),
                p.to_string(),
                (p / b.width()).to_string(),
            ])
            .map_err(io_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_steps(steps: &[StepLog], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["step", "used_surrogate", "beta", "refined", "accepted", "iteration", "cause"]).map_err(io_csv)?;
    for s in steps {
        let cause = match s.cause {
            Some(RefinementCause::Random) => "random",
            Some(RefinementCause::Misassignment) => "misassignment",
            Some(RefinementCause::Fallback) => "fallback",
            None => "",
        };
        w.write_record([
            s.step.to_string(),
            s.used_surrogate.to_string(),
            s.beta.map(|b| b.to_string()).unwrap_or_default(),
            s.refined.to_string(),
            s.accepted.to_string(),
            s.iteration.to_string(),
            cause.to_string(),
        ])
        .map_err(io_csv)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `histogram.csv`, `pdf.csv`, `summary.json`, `runtime.json`,
/// `config.toml` and, when present, `steps.csv` and `store.csv` into `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_histograms(outcome, &dir.join("histogram.csv"))?;
    write_pdf(&outcome.binning, &outcome.pdf, File::create(dir.join("pdf.csv"))?)?;

    let summary = serde_json::to_string_pretty(&outcome.summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    let runtime = serde_json::json!({ "runtime_seconds": outcome.runtime_seconds });
    std::fs::write(dir.join("runtime.json"), format!("{runtime:#}\n"))?;
    std::fs::write(dir.join("config.toml"), outcome.config.to_toml()?)?;

    if let Some(steps) = &outcome.steps {
        write_steps(steps, &dir.join("steps.csv"))?;
    }
    if let Some(store) = &outcome.store {
        let mut f = BufWriter::new(File::create(dir.join("store.csv"))?);
        store.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}
