//! Random-walk Metropolis–Hastings over input points.
//!
//! Every step consumes random numbers in a fixed layout: the `d` proposal
//! normals, then one refinement uniform, then one acceptance uniform. Kernels
//! that do not refine still consume the refinement slot, so the exact kernel and
//! the surrogate kernel walk identical paths whenever their `y` values agree.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{argument, state, Result};
use crate::problem::{evaluate, EvalLedger, InputPoint, PerformanceModel};
use crate::rng::ChainRng;

/// Current position of a chain together with its output and target log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: InputPoint,
    pub y: f64,
    pub log_q: f64,
}

/// A log-density over `(x, y = g(x))` pairs. Returns `-inf` off the support.
pub trait LogTarget {
    fn log_density(&self, x: &[f64], y: f64) -> f64;
}

impl<F: Fn(&[f64], f64) -> f64> LogTarget for F {
    fn log_density(&self, x: &[f64], y: f64) -> f64 {
        self(x, y)
    }
}

/// Gaussian random-walk proposal with per-coordinate standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    scale: Vec<f64>,
}

impl Proposal {
    pub fn new(scale: Vec<f64>) -> Result<Self> {
        if scale.is_empty() || scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(argument("proposal scales must be positive and finite"));
        }
        Ok(Proposal { scale })
    }

    /// Builds a proposal for `dimension` coordinates from either one shared
    /// scale or one scale per coordinate.
    pub fn broadcast(scale: &[f64], dimension: usize) -> Result<Self> {
        match scale.len() {
            1 => Proposal::new(vec![scale[0]; dimension]),
            n if n == dimension => Proposal::new(scale.to_vec()),
            n => Err(argument(format!(
                "proposal has {n} scales for a {dimension}-dimensional input"
            ))),
        }
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn dimension(&self) -> usize {
        self.scale.len()
    }

    /// `x + scale ⊙ z` for a given standard-normal vector `z`.
    pub fn apply(&self, x: &[f64], z: &[f64]) -> InputPoint {
        InputPoint::from_vec(
            x.iter().zip(&self.scale).zip(z).map(|((xi, s), zi)| xi + s * zi).collect(),
        )
    }
}

/// Random numbers consumed by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDraws {
    pub z: Vec<f64>,
    pub u_refine: f64,
    pub u_accept: f64,
}

impl StepDraws {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, dimension: usize) -> Self {
        let z = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let u_refine = rng.random::<f64>();
        let u_accept = rng.random::<f64>();
        StepDraws { z, u_refine, u_accept }
    }
}

/// Draws `x⁺ ~ N(x, diag(scale²))`.
pub fn propose<R: Rng + ?Sized>(rng: &mut R, x: &[f64], prop: &Proposal) -> Result<InputPoint> {
    if x.len() != prop.dimension() {
        return Err(argument("proposal and point dimensions differ"));
    }
    let z: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
    Ok(prop.apply(x, &z))
}

/// Metropolis acceptance in log space: accept when `log u < log q⁺ - log q⁻`.
pub fn accepts(u_accept: f64, log_q_current: f64, log_q_proposed: f64) -> bool {
    if log_q_proposed == f64::NEG_INFINITY {
        return false;
    }
    u_accept.ln() < log_q_proposed - log_q_current
}

/// Why a step evaluated the true model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementCause {
    /// The random refinement draw fell below γ.
    Random,
    /// The misassignment probability exceeded its threshold.
    Misassignment,
    /// The local surrogate could not be built.
    Fallback,
}

/// What happened during one kernel step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub used_surrogate: bool,
    pub beta: Option<f64>,
    pub refined: bool,
    pub cause: Option<RefinementCause>,
    pub accepted: bool,
}

impl StepRecord {
    fn exact(accepted: bool) -> Self {
        StepRecord { used_surrogate: false, beta: None, refined: false, cause: None, accepted }
    }
}

/// One transition of a Markov chain targeting a [`LogTarget`].
pub trait StepKernel {
    fn step(
        &mut self,
        rng: &mut ChainRng,
        state: &ChainState,
        target: &dyn LogTarget,
        ledger: &EvalLedger,
    ) -> Result<(ChainState, StepRecord)>;

    /// Notifies the kernel of a true evaluation made outside its steps, such as
    /// while searching for a starting point.
    fn observe_true_evaluation(&mut self, _x: &InputPoint, _y: f64) {}
}

/// One exact Metropolis–Hastings step: the proposal is evaluated with the
/// true model.
pub fn mh_step(
    rng: &mut ChainRng,
    state: &ChainState,
    target: &dyn LogTarget,
    model: &dyn PerformanceModel,
    prop: &Proposal,
    ledger: &EvalLedger,
) -> Result<(ChainState, StepRecord)> {
    if !state.log_q.is_finite() {
        return Err(state_error(state));
    }
    let draws = StepDraws::draw(rng, prop.dimension());
    let x_new = prop.apply(&state.x, &draws.z);
    let y_new = evaluate(model, &x_new, ledger)?;
    let log_q_new = target.log_density(&x_new, y_new);
    if accepts(draws.u_accept, state.log_q, log_q_new) {
        Ok((ChainState { x: x_new, y: y_new, log_q: log_q_new }, StepRecord::exact(true)))
    } else {
        Ok((state.clone(), StepRecord::exact(false)))
    }
}

pub(crate) fn state_error(state: &ChainState) -> crate::Error {
    self::state(format!(
        "chain state at {:?} has non-finite log density {}",
        state.x.coords(),
        state.log_q
    ))
}

/// Plain Metropolis–Hastings with true model evaluations at every step.
pub struct ExactKernel<'a> {
    model: &'a dyn PerformanceModel,
    proposal: Proposal,
}

impl<'a> ExactKernel<'a> {
    pub fn new(model: &'a dyn PerformanceModel, proposal: Proposal) -> Result<Self> {
        if proposal.dimension() != model.dimension() {
            return Err(argument("proposal dimension does not match the model"));
        }
        Ok(ExactKernel { model, proposal })
    }
}

impl StepKernel for ExactKernel<'_> {
    fn step(
        &mut self,
        rng: &mut ChainRng,
        state: &ChainState,
        target: &dyn LogTarget,
        ledger: &EvalLedger,
    ) -> Result<(ChainState, StepRecord)> {
        mh_step(rng, state, target, self.model, &self.proposal, ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::IndependentNormal;
    use crate::rng;
    use rand::RngCore;

    struct Identity;

    impl PerformanceModel for Identity {
        fn name(&self) -> &str {
            "identity"
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
        fn draw_prior(&self, rng: &mut dyn RngCore) -> InputPoint {
            IndependentNormal::standard(1).draw(rng)
        }
    }

    fn start(target: &dyn LogTarget, x: f64) -> ChainState {
        ChainState { x: InputPoint::new(vec![x]).unwrap(), y: x, log_q: target.log_density(&[x], x) }
    }

    #[test]
    fn proposal_validation() {
        assert!(Proposal::new(vec![]).is_err());
        assert!(Proposal::new(vec![1.0, 0.0]).is_err());
        assert_eq!(Proposal::broadcast(&[0.5], 3).unwrap().scale(), &[0.5, 0.5, 0.5]);
        assert!(Proposal::broadcast(&[0.5, 0.1], 3).is_err());
    }

    #[test]
    fn tiny_scale_proposal_stays_put() {
        let prop = Proposal::new(vec![1e-300, 1e-300]).unwrap();
        let x = [0.3, -1.2];
        let xp = propose(&mut rng::stream(1, 0), &x, &prop).unwrap();
        assert_eq!(xp.coords(), &x);
    }

    #[test]
    fn proposal_is_deterministic_and_centered() {
        let prop = Proposal::new(vec![0.5, 2.0]).unwrap();
        let x = [1.0, -3.0];
        let a = propose(&mut rng::stream(5, 0), &x, &prop).unwrap();
        let b = propose(&mut rng::stream(5, 0), &x, &prop).unwrap();
        assert_eq!(a, b);

        let mut r = rng::stream(6, 0);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let p = propose(&mut r, &x, &prop).unwrap();
            sum[0] += p[0];
            sum[1] += p[1];
        }
        for k in 0..2 {
            let mean = sum[k] / n as f64;
            assert!((mean - x[k]).abs() < 3.0 * prop.scale()[k] / (n as f64).sqrt());
        }
    }

    #[test]
    fn out_of_support_proposals_are_rejected() {
        let ledger = EvalLedger::new();
        let target = |_x: &[f64], y: f64| if y < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        let mut s = start(&target, 0.0);
        let prop = Proposal::new(vec![1.0]).unwrap();
        let mut r = rng::stream(2, 0);
        for _ in 0..2000 {
            let (next, rec) = mh_step(&mut r, &s, &target, &Identity, &prop, &ledger).unwrap();
            assert!(next.y >= 0.0);
            assert!(next.log_q.is_finite());
            if next.y < 0.0 {
                assert!(!rec.accepted);
            }
            s = next;
        }
        assert_eq!(ledger.true_evals(), 2000);
    }

    #[test]
    fn uphill_moves_always_accepted() {
        // Strictly increasing log density: every proposal to the right is accepted.
        let target = |x: &[f64], _y: f64| x[0];
        let prop = Proposal::new(vec![1.0]).unwrap();
        let ledger = EvalLedger::new();
        let mut r = rng::stream(3, 0);
        let mut s = start(&target, 0.0);
        for _ in 0..1000 {
            let (next, rec) = mh_step(&mut r, &s, &target, &Identity, &prop, &ledger).unwrap();
            if next.x[0] > s.x[0] {
                assert!(rec.accepted);
            }
            s = next;
        }
    }

    #[test]
    fn acceptance_decisions_replay_from_the_seed() {
        let target = |x: &[f64], _y: f64| -0.5 * x[0] * x[0];
        let prop = Proposal::new(vec![1.3]).unwrap();
        let ledger = EvalLedger::new();
        let mut chain = rng::stream(11, 0);
        let mut replay = rng::stream(11, 0);
        let mut s = start(&target, 0.2);
        for _ in 0..500 {
            let draws = StepDraws::draw(&mut replay, 1);
            let (next, rec) = mh_step(&mut chain, &s, &target, &Identity, &prop, &ledger).unwrap();
            let x_new = prop.apply(&s.x, &draws.z);
            let log_alpha = target.log_density(&x_new, x_new[0]) - s.log_q;
            assert_eq!(rec.accepted, draws.u_accept.ln() < log_alpha);
            s = next;
        }
    }

    #[test]
    fn non_finite_start_is_a_state_error() {
        let target = |_x: &[f64], _y: f64| 0.0;
        let s = ChainState { x: InputPoint::new(vec![0.0]).unwrap(), y: 0.0, log_q: f64::NEG_INFINITY };
        let prop = Proposal::new(vec![1.0]).unwrap();
        assert!(mh_step(&mut rng::stream(1, 0), &s, &target, &Identity, &prop, &EvalLedger::new()).is_err());
    }
}
