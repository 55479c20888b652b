//! Uncertainty-quantification problems: a deterministic performance function,
//! a prior input density and a ledger counting model evaluations.

use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// An input vector `x` of a performance model.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPoint(Vec<f64>);

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(argument("input point must have at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(argument(format!("non-finite input coordinate {bad}")));
        }
        Ok(InputPoint(coords))
    }

    /// Wraps coordinates produced by arithmetic on already validated points.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        InputPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for InputPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<InputPoint> for Vec<f64> {
    fn from(p: InputPoint) -> Self {
        p.0
    }
}

/// A deterministic performance function `g` together with its input prior.
///
/// Implementations must be pure: the same input always yields the same
/// output, and evaluation may happen from several threads at once.
pub trait PerformanceModel: Send + Sync {
    /// Registry name of the model.
    fn name(&self) -> &str;

    /// Input dimension `d_x`.
    fn dimension(&self) -> usize;

    /// Raw evaluation of `g(x)`. Callers go through [`evaluate`], which checks
    /// dimensions and keeps the ledger.
    fn performance(&self, x: &[f64]) -> Result<f64>;

    /// Natural log of the prior density, up to a constant fixed per instance.
    fn log_prior(&self, x: &[f64]) -> f64;

    /// One draw from the prior.
    fn draw_prior(&self, rng: &mut dyn RngCore) -> InputPoint;
}

/// Counts of true-model and surrogate evaluations.
#[derive(Debug, Default)]
pub struct EvalLedger {
    true_evals: AtomicU64,
    surrogate_evals: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub true_evals: u64,
    pub surrogate_evals: u64,
}

impl EvalLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn true_evals(&self) -> u64 {
        self.true_evals.load(Ordering::Relaxed)
    }

    pub fn surrogate_evals(&self) -> u64 {
        self.surrogate_evals.load(Ordering::Relaxed)
    }

    pub(crate) fn record_true(&self) {
        self.true_evals.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_surrogate(&self) {
        self.surrogate_evals.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            true_evals: self.true_evals(),
            surrogate_evals: self.surrogate_evals(),
        }
    }
}

fn check_dimension(model: &dyn PerformanceModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dimension() {
        return Err(argument(format!(
            "model '{}' expects {} inputs, got {}",
            model.name(),
            model.dimension(),
            x.len()
        )));
    }
    Ok(())
}

/// Evaluates the true model at `x` and charges one evaluation to the ledger.
pub fn evaluate(model: &dyn PerformanceModel, x: &[f64], ledger: &EvalLedger) -> Result<f64> {
    check_dimension(model, x)?;
    ledger.record_true();
    let y = model.performance(x)?;
    if !y.is_finite() {
        return Err(Error::Evaluation {
            x: x.to_vec(),
            reason: format!("non-finite output {y}"),
        });
    }
    Ok(y)
}

pub fn log_prior_density(model: &dyn PerformanceModel, x: &[f64]) -> Result<f64> {
    check_dimension(model, x)?;
    Ok(model.log_prior(x))
}

/// Draws `n` independent prior samples.
pub fn sample_prior(
    model: &dyn PerformanceModel,
    rng: &mut dyn RngCore,
    n: usize,
) -> Result<Vec<InputPoint>> {
    if n == 0 {
        return Err(argument("sample count must be at least 1"));
    }
    Ok((0..n).map(|_| model.draw_prior(rng)).collect())
}

/// Independent normal prior with per-coordinate means and standard deviations.
///
/// The log-density constant is `-(d/2) log 2π - Σ log σ_i`, so the value at
/// the mean of a standard normal is `-(d/2) log 2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentNormal {
    means: Vec<f64>,
    std_devs: Vec<f64>,
    log_norm: f64,
}

impl IndependentNormal {
    pub fn new(means: Vec<f64>, variances: &[f64]) -> Result<Self> {
        if means.len() != variances.len() || means.is_empty() {
            return Err(argument("means and variances must be nonempty and equally long"));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(argument("variances must be positive and finite"));
        }
        let std_devs: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
        let d = means.len() as f64;
        let log_norm = -0.5 * d * (2.0 * std::f64::consts::PI).ln()
            - std_devs.iter().map(|s| s.ln()).sum::<f64>();
        Ok(IndependentNormal { means, std_devs, log_norm })
    }

    pub fn standard(dimension: usize) -> Self {
        IndependentNormal::new(vec![0.0; dimension], &vec![1.0; dimension])
            .expect("unit variances are valid")
    }

    pub fn dimension(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let quad: f64 = x
            .iter()
            .zip(&self.means)
            .zip(&self.std_devs)
            .map(|((v, m), s)| {
                let z = (v - m) / s;
                z * z
            })
            .sum();
        self.log_norm - 0.5 * quad
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> InputPoint {
        let coords = self
            .means
            .iter()
            .zip(&self.std_devs)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect();
        InputPoint::from_vec(coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    struct Identity(IndependentNormal);

    impl PerformanceModel for Identity {
        fn name(&self) -> &str {
            "identity"
        }
        fn dimension(&self) -> usize {
            self.0.dimension()
        }
        fn performance(&self, x: &[f64]) -> Result<f64> {
            Ok(x[0])
        }
        fn log_prior(&self, x: &[f64]) -> f64 {
            self.0.log_density(x)
        }
        fn draw_prior(&self, rng: &mut dyn RngCore) -> InputPoint {
            self.0.draw(rng)
        }
    }

    struct Broken;

    impl PerformanceModel for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn dimension(&self) -> usize {
            1
        }
        fn performance(&self, x: &[f64]) -> Result<f64> {
            Ok(x[0].ln())
        }
        fn log_prior(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn draw_prior(&self, _rng: &mut dyn RngCore) -> InputPoint {
            InputPoint::from_vec(vec![1.0])
        }
    }

    #[test]
    fn input_point_rejects_non_finite() {
        assert!(InputPoint::new(vec![1.0, f64::NAN]).is_err());
        assert!(InputPoint::new(vec![]).is_err());
        assert_eq!(InputPoint::new(vec![1.0, 2.0]).unwrap().coords(), &[1.0, 2.0]);
    }

    #[test]
    fn standard_normal_log_density() {
        let p = IndependentNormal::standard(2);
        assert!((p.log_density(&[0.0, 0.0]) + (2.0 * PI).ln()).abs() < 1e-14);
        let diff = p.log_density(&[1.0, 0.0]) - p.log_density(&[0.0, 0.0]);
        assert!((diff + 0.5).abs() < 1e-14);
    }

    #[test]
    fn ledger_counts_each_true_evaluation() {
        let model = Identity(IndependentNormal::standard(1));
        let ledger = EvalLedger::new();
        for k in 0..7 {
            evaluate(&model, &[k as f64], &ledger).unwrap();
        }
        assert_eq!(ledger.true_evals(), 7);
        assert!(evaluate(&model, &[1.0, 2.0], &ledger).is_err());
        assert_eq!(ledger.true_evals(), 7);
    }

    #[test]
    fn non_finite_output_is_an_evaluation_error() {
        let ledger = EvalLedger::new();
        match evaluate(&Broken, &[-1.0], &ledger) {
            Err(Error::Evaluation { x, .. }) => assert_eq!(x, vec![-1.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ledger.true_evals(), 1);
    }

    #[test]
    fn sample_prior_contract() {
        let model = Identity(IndependentNormal::standard(2));
        let mut r = rng::stream(1, 0);
        assert!(sample_prior(&model, &mut r, 0).is_err());

        let a = sample_prior(&model, &mut rng::stream(9, 0), 50).unwrap();
        let b = sample_prior(&model, &mut rng::stream(9, 0), 50).unwrap();
        assert_eq!(a, b);

        let n = 100_000;
        let draws = sample_prior(&model, &mut r, n).unwrap();
        for k in 0..2 {
            let mean = draws.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "variance {var}");
        }
    }

    #[test]
    fn non_standard_variances_are_honored() {
        let prior = IndependentNormal::new(vec![4.0, 500.0], &[0.001, 100.0]).unwrap();
        assert!((prior.log_density(&[4.0, 500.0]) - prior.log_norm).abs() < 1e-12);
        let mut r = rng::stream(3, 0);
        let n = 100_000;
        let draws: Vec<_> = (0..n).map(|_| prior.draw(&mut r)).collect();
        for (k, var) in [0.001, 100.0].iter().enumerate() {
            let mean = draws.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            let v = draws.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((v / var - 1.0).abs() < 0.05);
        }
    }
}
