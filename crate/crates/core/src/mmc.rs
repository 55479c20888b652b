//! The multicanonical iteration.
//!
//! Iteration `k` samples the biasing density `q_k(x) ∝ p(x) / Θ_k(bin(g(x)))`
//! restricted to the output range, tallies the outputs, and sets the next
//! weights to the per-bin probability estimates `P_{k,i} = (N*_{k,i}/N) Θ_{k,i}`.
//! Weights are renormalized every iteration so that `Σ Θ_i` keeps its initial
//! value; bins that received no samples carry their weight forward.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::binning::{Binning, Histogram};
use crate::error::{argument, state, Result};
use crate::mcmc::{ChainState, LogTarget, StepKernel, StepRecord};
use crate::problem::{evaluate, EvalLedger, LedgerSnapshot, PerformanceModel};
use crate::rng::{self, ChainRng};

/// Per-bin weights `Θ_{k,i}` of the biasing density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    theta: Vec<f64>,
    iteration: usize,
    reference_sum: f64,
}

impl WeightTable {
    /// Initial table `Θ_{0,i} = ρ` for all bins.
    pub fn uniform(m: usize, rho: f64) -> Result<Self> {
        WeightTable::from_weights(vec![rho; m])
    }

    /// A table with explicit weights; their sum becomes the normalization that
    /// later updates preserve.
    pub fn from_weights(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(argument("weight table needs at least one bin"));
        }
        if theta.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(argument("weights must be positive and finite"));
        }
        let reference_sum = theta.iter().sum();
        Ok(WeightTable { theta, iteration: 0, reference_sum })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `log q(x) = log p(x) - log Θ_i` for `i = bin(y)`, or `-inf` when `y` lies
/// outside the output range.
pub fn log_bias_density(
    w: &WeightTable,
    b: &Binning,
    model: &dyn PerformanceModel,
    x: &[f64],
    y: f64,
) -> f64 {
    if !y.is_finite() {
        return f64::NEG_INFINITY;
    }
    match b.locate(y) {
        Some(i) => model.log_prior(x) - w.theta[i].ln(),
        None => f64::NEG_INFINITY,
    }
}

/// The biasing density of one iteration as a [`LogTarget`].
pub struct BiasTarget<'a> {
    weights: &'a WeightTable,
    binning: &'a Binning,
    model: &'a dyn PerformanceModel,
}

impl<'a> BiasTarget<'a> {
    pub fn new(
        weights: &'a WeightTable,
        binning: &'a Binning,
        model: &'a dyn PerformanceModel,
    ) -> Self {
        BiasTarget { weights, binning, model }
    }
}

impl LogTarget for BiasTarget<'_> {
    fn log_density(&self, x: &[f64], y: f64) -> f64 {
        log_bias_density(self.weights, self.binning, self.model, x, y)
    }
}

fn check_histogram(w: &WeightTable, h: &Histogram) -> Result<()> {
    if h.total == 0 {
        return Err(state("histogram is empty"));
    }
    if h.len() != w.len() {
        return Err(argument(format!(
            "histogram has {} bins but the weight table has {}",
            h.len(),
            w.len()
        )));
    }
    Ok(())
}

/// Next weight table from an iteration's histogram.
pub fn update_weights(w: &WeightTable, h: &Histogram) -> Result<WeightTable> {
    check_histogram(w, h)?;
    let n = h.total as f64;
    let mut theta: Vec<f64> = w
        .theta
        .iter()
        .zip(&h.counts)
        .map(|(&t, &c)| if c > 0 { c as f64 / n * t } else { t })
        .collect();
    let scale = w.reference_sum / theta.iter().sum::<f64>();
    for t in &mut theta {
        *t *= scale;
    }
    Ok(WeightTable { theta, iteration: w.iteration + 1, reference_sum: w.reference_sum })
}

/// Per-bin probability estimates `P_i ∝ (N*_i/N) Θ_i`, normalized to sum to 1.
pub fn estimate_probabilities(w: &WeightTable, h: &Histogram) -> Result<Vec<f64>> {
    check_histogram(w, h)?;
    let raw: Vec<f64> =
        w.theta.iter().zip(&h.counts).map(|(&t, &c)| c as f64 / h.total as f64 * t).collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(state("no samples fell inside the output range"));
    }
    Ok(raw.into_iter().map(|p| p / sum).collect())
}

/// Density estimate `π(b_i) = P_i / Δ`, normalized so that `Σ π_i Δ = 1`.
pub fn estimate_pdf(w: &WeightTable, h: &Histogram, b: &Binning) -> Result<Vec<f64>> {
    if b.len() != w.len() {
        return Err(argument("binning and weight table sizes differ"));
    }
    let p = estimate_probabilities(w, h)?;
    Ok(p.into_iter().map(|pi| pi / b.width()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub central3: f64,
    pub central4: f64,
    pub central5: f64,
}

/// Mean and central moments 2–5 of the bin-center measure `pdf_i Δ`.
pub fn estimate_moments(pdf: &[f64], b: &Binning) -> Result<Moments> {
    if pdf.len() != b.len() {
        return Err(argument("pdf length does not match the binning"));
    }
    let mass: f64 = pdf.iter().map(|p| p * b.width()).sum();
    if !(mass > 0.0) {
        return Err(state("pdf has no mass"));
    }
    let weights: Vec<(f64, f64)> =
        pdf.iter().enumerate().map(|(i, p)| (b.center(i), p * b.width() / mass)).collect();
    let mean: f64 = weights.iter().map(|(c, w)| c * w).sum();
    let central = |r: i32| weights.iter().map(|(c, w)| (c - mean).powi(r) * w).sum::<f64>();
    Ok(Moments {
        mean,
        variance: central(2),
        central3: central(3),
        central4: central(4),
        central5: central(5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmcConfig {
    /// Number of iterations `K`.
    pub iterations: usize,
    /// Tallied samples per iteration `N`.
    pub samples_per_iteration: usize,
    /// One shared or one per-coordinate random-walk scale.
    pub proposal_scale: Vec<f64>,
    /// Discarded steps at the start of each iteration; `None` means `N / 10`.
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl MmcConfig {
    pub fn new(iterations: usize, samples_per_iteration: usize, seed: u64) -> Self {
        MmcConfig {
            iterations,
            samples_per_iteration,
            proposal_scale: vec![0.5],
            burn_in: None,
            seed,
        }
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in.unwrap_or(self.samples_per_iteration / 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(argument("at least one iteration is required"));
        }
        if self.samples_per_iteration == 0 {
            return Err(argument("samples per iteration must be positive"));
        }
        if self.burn_in_steps() >= self.samples_per_iteration {
            return Err(argument("burn-in must be shorter than the iteration"));
        }
        Ok(())
    }
}

/// Everything recorded about one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Weights that defined the biasing density sampled in this iteration.
    pub weights: WeightTable,
    pub histogram: Histogram,
    /// Probability estimates from this iteration's histogram.
    pub probabilities: Vec<f64>,
    pub flatness: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmcResult {
    pub iterations: Vec<IterationRecord>,
    /// Final per-bin probabilities `P_i` (last iteration).
    pub probabilities: Vec<f64>,
    /// Final density estimate at the bin centers.
    pub pdf: Vec<f64>,
    pub moments: Moments,
    /// Weights after the last update.
    pub final_weights: WeightTable,
    /// True evaluations spent finding the starting point.
    pub start_evaluations: u64,
    /// Fraction of the start-search prior draws that fell in the output range.
    pub rho: f64,
    pub ledger: LedgerSnapshot,
}

/// Receives every kernel step; `iteration` and `step` count from zero and
/// `step` runs over burn-in and tallied steps alike.
pub trait StepObserver {
    fn observe(&mut self, iteration: usize, step: usize, tallied: bool, record: &StepRecord, state: &ChainState);
}

impl<F: FnMut(usize, usize, bool, &StepRecord, &ChainState)> StepObserver for F {
    fn observe(&mut self, iteration: usize, step: usize, tallied: bool, record: &StepRecord, state: &ChainState) {
        self(iteration, step, tallied, record, state)
    }
}

/// Maximum number of prior draws tried when looking for an in-range start.
pub const MAX_START_DRAWS: usize = 1000;

/// Finds an in-range starting point by evaluating prior draws.
///
/// Returns the state, the number of draws evaluated and how many were in range.
pub fn find_start(
    model: &dyn PerformanceModel,
    binning: &Binning,
    weights: &WeightTable,
    rng: &mut dyn RngCore,
    kernel: &mut dyn StepKernel,
    ledger: &EvalLedger,
) -> Result<(ChainState, u64)> {
    for attempt in 1..=MAX_START_DRAWS {
        let x = model.draw_prior(rng);
        let y = evaluate(model, &x, ledger)?;
        kernel.observe_true_evaluation(&x, y);
        if binning.contains(y) {
            let log_q = log_bias_density(weights, binning, model, &x, y);
            return Ok((ChainState { x, y, log_q }, attempt as u64));
        }
    }
    Err(state(format!(
        "no prior draw out of {MAX_START_DRAWS} produced an output inside [{}, {}]",
        binning.lo(),
        binning.hi()
    )))
}

pub fn run_mmc(
    model: &dyn PerformanceModel,
    binning: &Binning,
    config: &MmcConfig,
    kernel: &mut dyn StepKernel,
    ledger: &EvalLedger,
) -> Result<MmcResult> {
    run_mmc_observed(model, binning, config, kernel, ledger, None)
}

/// Runs `K` multicanonical iterations, starting from uniform weights.
pub fn run_mmc_observed(
    model: &dyn PerformanceModel,
    binning: &Binning,
    config: &MmcConfig,
    kernel: &mut dyn StepKernel,
    ledger: &EvalLedger,
    mut observer: Option<&mut dyn StepObserver>,
) -> Result<MmcResult> {
    config.validate()?;
    if config.samples_per_iteration < binning.len() {
        // Advisory only: fewer samples than bins cannot flatten every bin.
        eprintln!(
            "warning: {} samples per iteration for {} bins",
            config.samples_per_iteration,
            binning.len()
        );
    }

    let mut weights = WeightTable::uniform(binning.len(), 1.0)?;
    let mut start_rng = rng::stream(config.seed, rng::START_STREAM);
    let (mut current, start_evaluations) =
        find_start(model, binning, &weights, &mut start_rng, kernel, ledger)?;
    let mut chain_rng: ChainRng = rng::stream(config.seed, rng::CHAIN_STREAM);

    let burn_in = config.burn_in_steps();
    let mut records = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let target = BiasTarget::new(&weights, binning, model);
        current.log_q = target.log_density(&current.x, current.y);
        if !current.log_q.is_finite() {
            return Err(crate::mcmc::state_error(&current));
        }

        let mut histogram = Histogram::new(binning.len());
        let mut accepted = 0usize;
        let total_steps = burn_in + config.samples_per_iteration;
        for step in 0..total_steps {
            let (next, record) = kernel.step(&mut chain_rng, &current, &target, ledger)?;
            current = next;
            let tallied = step >= burn_in;
            if tallied {
                if record.accepted {
                    accepted += 1;
                }
                histogram.record(binning.locate(current.y), current.y < binning.lo());
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs.observe(iteration, step, tallied, &record, &current);
            }
        }

        let probabilities = estimate_probabilities(&weights, &histogram)?;
        let next_weights = update_weights(&weights, &histogram)?;
        records.push(IterationRecord {
            weights: weights.clone(),
            flatness: histogram.flatness(),
            acceptance_rate: accepted as f64 / config.samples_per_iteration as f64,
            histogram,
            probabilities,
        });
        weights = next_weights;
    }

    let last = records.last().expect("at least one iteration");
    let pdf = estimate_pdf(&last.weights, &last.histogram, binning)?;
    let moments = estimate_moments(&pdf, binning)?;
    Ok(MmcResult {
        probabilities: last.probabilities.clone(),
        pdf,
        moments,
        final_weights: weights,
        start_evaluations,
        rho: 1.0 / start_evaluations as f64,
        ledger: ledger.snapshot(),
        iterations: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: &[u64]) -> Histogram {
        let mut h = Histogram::new(counts.len());
        h.counts = counts.to_vec();
        h.total = counts.iter().sum();
        h
    }

    #[test]
    fn flat_histogram_is_a_fixed_point() {
        let w = WeightTable::from_weights(vec![0.5, 0.5]).unwrap();
        let next = update_weights(&w, &hist(&[50, 50])).unwrap();
        assert_eq!(next.theta(), &[0.5, 0.5]);
        assert_eq!(next.iteration(), 1);
    }

    #[test]
    fn skewed_histogram_reweights() {
        let w = WeightTable::from_weights(vec![0.5, 0.5]).unwrap();
        let next = update_weights(&w, &hist(&[75, 25])).unwrap();
        assert!((next.theta()[0] - 0.75).abs() < 1e-15);
        assert!((next.theta()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_bins_carry_their_weight_forward() {
        let third = 1.0 / 3.0;
        let w = WeightTable::from_weights(vec![third; 3]).unwrap();
        let next = update_weights(&w, &hist(&[60, 40, 0])).unwrap();
        // Pre-normalization (0.2, 0.1333, 0.3333), rescaled to sum to 1.
        let pre = [0.6 * third, 0.4 * third, third];
        let s: f64 = pre.iter().sum();
        for (t, p) in next.theta().iter().zip(pre) {
            assert!((t - p / s).abs() < 1e-15);
        }
        assert!(next.theta().iter().all(|t| *t > 0.0));
    }

    #[test]
    fn update_rejects_empty_or_mismatched_histograms() {
        let w = WeightTable::uniform(2, 1.0).unwrap();
        assert!(update_weights(&w, &hist(&[0, 0])).is_err());
        assert!(update_weights(&w, &hist(&[1, 2, 3])).is_err());
        assert!(WeightTable::from_weights(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_pdf_from_exact_counts() {
        let b = Binning::new(0.0, 1.0, 10).unwrap();
        let w = WeightTable::uniform(10, 1.0).unwrap();
        let pdf = estimate_pdf(&w, &hist(&[100; 10]), &b).unwrap();
        for p in &pdf {
            assert!((p - 1.0).abs() < 1e-14);
        }
        let mass: f64 = pdf.iter().map(|p| p * b.width()).sum();
        assert!((mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unvisited_bins_report_zero_density() {
        let b = Binning::new(0.0, 3.0, 3).unwrap();
        let w = WeightTable::from_weights(vec![1.0, 2.0, 3.0]).unwrap();
        let pdf = estimate_pdf(&w, &hist(&[10, 0, 5]), &b).unwrap();
        assert_eq!(pdf[1], 0.0);
        assert!((pdf[0] / pdf[2] - 10.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pdf_has_vanishing_odd_moments() {
        let b = Binning::new(-2.0, 2.0, 8).unwrap();
        let pdf = [0.1, 0.3, 0.7, 0.9, 0.9, 0.7, 0.3, 0.1];
        let m = estimate_moments(&pdf, &b).unwrap();
        assert!(m.mean.abs() < 1e-14);
        assert!(m.central3.abs() < 1e-14);
        assert!(m.central5.abs() < 1e-14);
        assert!(m.variance > 0.0);
    }

    #[test]
    fn point_mass_has_zero_variance() {
        let b = Binning::new(0.0, 5.0, 5).unwrap();
        let pdf = [0.0, 0.0, 1.0, 0.0, 0.0];
        let m = estimate_moments(&pdf, &b).unwrap();
        assert!((m.mean - 2.5).abs() < 1e-14);
        assert!(m.variance <= b.width() * b.width() / 12.0);
        assert_eq!(m.variance, 0.0);
        assert!(estimate_moments(&[0.0; 5], &b).is_err());
    }

    #[test]
    fn bias_density_divides_by_the_bin_weight() {
        use crate::problem::{IndependentNormal, InputPoint};
        struct Id;
        impl PerformanceModel for Id {
            fn name(&self) -> &str {
                "id"
            }
            fn dimension(&self) -> usize {
                1
            }
            fn performance(&self, x: &[f64]) -> Result<f64> {
                Ok(x[0])
            }
            fn log_prior(&self, x: &[f64]) -> f64 {
                IndependentNormal::standard(1).log_density(x)
            }
            fn draw_prior(&self, _rng: &mut dyn RngCore) -> InputPoint {
                unreachable!()
            }
        }
        let b = Binning::new(-1.0, 1.0, 2).unwrap();
        let ones = WeightTable::uniform(2, 1.0).unwrap();
        let x = [0.3];
        assert_eq!(log_bias_density(&ones, &b, &Id, &x, 0.3), Id.log_prior(&x));
        let w = WeightTable::from_weights(vec![1.0, 2.0]).unwrap();
        assert!((log_bias_density(&w, &b, &Id, &x, 0.3) - (Id.log_prior(&x) - 2f64.ln())).abs() < 1e-15);
        assert_eq!(log_bias_density(&w, &b, &Id, &x, 1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn config_validation() {
        let mut c = MmcConfig::new(2, 100, 1);
        assert_eq!(c.burn_in_steps(), 10);
        assert!(c.validate().is_ok());
        c.burn_in = Some(100);
        assert!(c.validate().is_err());
        assert!(MmcConfig::new(0, 100, 1).validate().is_err());
    }
}
