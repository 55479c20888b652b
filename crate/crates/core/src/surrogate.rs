//! Metropolis–Hastings with local GP surrogates.
//!
//! Each proposal is first predicted by a local GP built from the nearest
//! stored true evaluations. The true model is called instead when a random
//! refinement draw falls below `γ`, when the probability `β` that the
//! prediction sits in the wrong output bin exceeds `β_max`, or when the
//! surrogate cannot be built. Every true evaluation is added to the store.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::binning::Binning;
use crate::error::{argument, Result};
use crate::gp::{build_local_surrogate, EvaluationStore, KernelParams};
use crate::mcmc::{accepts, state_error, ChainState, LogTarget, Proposal, RefinementCause, StepDraws, StepKernel, StepRecord};
use crate::problem::{evaluate, EvalLedger, InputPoint, PerformanceModel};
use crate::rng::ChainRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateKernelConfig {
    /// Probability of a random refinement at each step.
    pub gamma: f64,
    /// Largest misassignment probability accepted from the surrogate.
    pub beta_max: f64,
    pub proposal: Proposal,
    /// Lengths and exponent for every local GP; the amplitude is recalibrated
    /// at each build.
    pub kernel: KernelParams,
}

impl SurrogateKernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(argument(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.beta_max > 0.0 && self.beta_max < 1.0) {
            return Err(argument(format!("beta_max must lie in (0, 1), got {}", self.beta_max)));
        }
        if self.proposal.dimension() != self.kernel.dimension() {
            return Err(argument("proposal and kernel dimensions differ"));
        }
        Ok(())
    }
}

/// `Φ(t; μ, σ)`, with the `σ = 0` limit taken as a step that is `½` at `t = μ`.
fn normal_cdf(t: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        0.5 * erfc(-(t - mu) / (sigma * std::f64::consts::SQRT_2))
    } else if t > mu {
        1.0
    } else if t < mu {
        0.0
    } else {
        0.5
    }
}

/// Probability that `y ~ N(mu, sigma²)` falls outside the bin containing `mu`,
/// together with that bin.
///
/// A prediction outside the output range has no bin; it is assigned to the
/// region where the biasing density vanishes, and `β` is the probability that
/// `y` lies inside the range after all. Non-finite inputs report `β = 1`.
pub fn misassignment_probability(mu: f64, sigma: f64, b: &Binning) -> (f64, Option<usize>) {
    if !mu.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
        return (1.0, None);
    }
    match b.locate(mu) {
        None => {
            let inside = normal_cdf(b.hi(), mu, sigma) - normal_cdf(b.lo(), mu, sigma);
            (inside.clamp(0.0, 1.0), None)
        }
        Some(i) => {
            let below = normal_cdf(b.lower_edge(i), mu, sigma);
            let above = 1.0 - normal_cdf(b.upper_edge(i), mu, sigma);
            ((below + above).clamp(0.0, 1.0), Some(i))
        }
    }
}

/// Counts of how the kernel's steps obtained their proposal outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateStats {
    pub steps: u64,
    pub surrogate_steps: u64,
    pub random_refinements: u64,
    pub misassignment_refinements: u64,
    pub fallbacks: u64,
}

impl SurrogateStats {
    pub fn refinements(&self) -> u64 {
        self.random_refinements + self.misassignment_refinements + self.fallbacks
    }
}

/// Step kernel that owns the evaluation store and grows it on refinement.
pub struct SurrogateKernel<'a> {
    model: &'a dyn PerformanceModel,
    binning: Binning,
    config: SurrogateKernelConfig,
    store: EvaluationStore,
    stats: SurrogateStats,
}

impl<'a> SurrogateKernel<'a> {
    pub fn new(
        model: &'a dyn PerformanceModel,
        binning: Binning,
        config: SurrogateKernelConfig,
        store: EvaluationStore,
    ) -> Result<Self> {
        config.validate()?;
        if config.proposal.dimension() != model.dimension() || store.dimension() != model.dimension() {
            return Err(argument("surrogate kernel dimension does not match the model"));
        }
        Ok(SurrogateKernel { model, binning, config, store, stats: SurrogateStats::default() })
    }

    pub fn config(&self) -> &SurrogateKernelConfig {
        &self.config
    }

    pub fn store(&self) -> &EvaluationStore {
        &self.store
    }

    pub fn into_store(self) -> EvaluationStore {
        self.store
    }

    pub fn stats(&self) -> SurrogateStats {
        self.stats
    }

    fn refine(&mut self, x: &InputPoint, ledger: &EvalLedger) -> Result<f64> {
        let y = evaluate(self.model, x, ledger)?;
        self.store.insert(x.clone(), y)?;
        Ok(y)
    }
}

impl StepKernel for SurrogateKernel<'_> {
    fn step(
        &mut self,
        rng: &mut ChainRng,
        state: &ChainState,
        target: &dyn LogTarget,
        ledger: &EvalLedger,
    ) -> Result<(ChainState, StepRecord)> {
        if !state.log_q.is_finite() {
            return Err(state_error(state));
        }
        let draws = StepDraws::draw(rng, self.config.proposal.dimension());
        let x_new = self.config.proposal.apply(&state.x, &draws.z);
        self.stats.steps += 1;

        let mut record = StepRecord { used_surrogate: false, beta: None, refined: true, cause: None, accepted: false };
        let y_new = if draws.u_refine < self.config.gamma {
            self.stats.random_refinements += 1;
            record.cause = Some(RefinementCause::Random);
            self.refine(&x_new, ledger)?
        } else {
            match build_local_surrogate(&self.store, &x_new, &self.config.kernel) {
                Ok(gp) => {
                    let posterior = gp.posterior(&x_new);
                    ledger.record_surrogate();
                    let (beta, _) = misassignment_probability(posterior.mean, posterior.std_dev(), &self.binning);
                    record.beta = Some(beta);
                    if beta > self.config.beta_max {
                        self.stats.misassignment_refinements += 1;
                        record.cause = Some(RefinementCause::Misassignment);
                        self.refine(&x_new, ledger)?
                    } else {
                        self.stats.surrogate_steps += 1;
                        record.used_surrogate = true;
                        record.refined = false;
                        posterior.mean
                    }
                }
                Err(_) => {
                    self.stats.fallbacks += 1;
                    record.cause = Some(RefinementCause::Fallback);
                    self.refine(&x_new, ledger)?
                }
            }
        };

        let log_q_new = target.log_density(&x_new, y_new);
        record.accepted = accepts(draws.u_accept, state.log_q, log_q_new);
        if record.accepted {
            Ok((ChainState { x: x_new, y: y_new, log_q: log_q_new }, record))
        } else {
            Ok((state.clone(), record))
        }
    }

    fn observe_true_evaluation(&mut self, x: &InputPoint, y: f64) {
        // Duplicates are skipped by the store; a finite value always inserts.
        let _ = self.store.insert(x.clone(), y);
    }
}
