//! Local GP surrogate built from the nearest stored evaluations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{unit_correlation, KernelParams};
use super::mean::QuadraticMean;
use super::store::EvaluationStore;
use crate::error::{argument, state, Error, Result};
use crate::problem::InputPoint;

/// Smallest admissible amplitude.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;
/// Diagonal jitter, relative to the amplitude, tried first.
pub const MIN_JITTER: f64 = 1e-10;
/// Largest relative jitter tried before giving up.
pub const MAX_JITTER: f64 = 1e-4;

/// Number of neighbors used by a local surrogate in `d` dimensions:
/// `ceil(√d (d+1)(d+2) / 2)`.
pub fn local_size(d: usize) -> usize {
    assert!(d >= 1, "dimension must be positive");
    let d = d as f64;
    (d.sqrt() * (d + 1.0) * (d + 2.0) / 2.0).ceil() as usize
}

/// Posterior mean and variance at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A fitted local GP: quadratic prior mean plus kernel correction.
#[derive(Debug, Clone)]
pub struct LocalGp {
    support: Vec<InputPoint>,
    values: Vec<f64>,
    mean: QuadraticMean,
    params: KernelParams,
    factor: Cholesky<f64, Dyn>,
    /// `C⁻¹ (y* - μ₀(X*))` for the unit-amplitude correlation matrix `C`.
    weights: DVector<f64>,
    jitter: f64,
}

impl LocalGp {
    /// Fits a GP to `support` with fixed lengths and exponent; the amplitude is
    /// set by maximum likelihood and the mean is expanded about `origin`.
    pub fn fit(
        support: Vec<(InputPoint, f64)>,
        lengths: &[f64],
        exponent: u32,
        origin: &[f64],
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(argument("local GP needs at least one support point"));
        }
        let (points, values): (Vec<InputPoint>, Vec<f64>) = support.into_iter().unzip();
        let mean = QuadraticMean::fit_about(&points, &values, origin)?;
        Self::assemble(points, values, mean, lengths, exponent, None)
    }

    /// A GP with a prescribed mean function and kernel (amplitude included).
    pub fn with_mean(support: Vec<(InputPoint, f64)>, mean: QuadraticMean, params: &KernelParams) -> Result<Self> {
        if support.is_empty() {
            return Err(argument("local GP needs at least one support point"));
        }
        let (points, values): (Vec<InputPoint>, Vec<f64>) = support.into_iter().unzip();
        Self::assemble(points, values, mean, &params.lengths, params.exponent, Some(params.amplitude))
    }

    fn assemble(
        points: Vec<InputPoint>,
        values: Vec<f64>,
        mean: QuadraticMean,
        lengths: &[f64],
        exponent: u32,
        amplitude: Option<f64>,
    ) -> Result<Self> {
        if points.iter().any(|p| p.len() != lengths.len()) {
            return Err(argument("support dimension does not match the kernel"));
        }
        let residuals = DVector::from_iterator(
            points.len(),
            points.iter().zip(&values).map(|(p, y)| y - mean.eval(p)),
        );
        let (factor, jitter) = factorize_correlation(&points, lengths, exponent)?;
        let weights = factor.solve(&residuals);
        let amplitude = amplitude.unwrap_or_else(|| amplitude_from(&residuals, &weights));
        let params = KernelParams::new(amplitude, lengths.to_vec(), exponent)?;
        Ok(LocalGp { support: points, values, mean, params, factor, weights, jitter })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mean_function(&self) -> &QuadraticMean {
        &self.mean
    }

    pub fn support(&self) -> &[InputPoint] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Relative diagonal jitter the factorization needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn posterior(&self, x: &[f64]) -> Posterior {
        let k = DVector::from_iterator(
            self.support.len(),
            self.support.iter().map(|s| self.params.correlation(x, s)),
        );
        let mean = self.mean.eval(x) + k.dot(&self.weights);
        let v = self.factor.l().solve_lower_triangular(&k).expect("factor diagonal is positive");
        let variance = (self.params.amplitude * (1.0 - v.norm_squared())).max(0.0);
        Posterior { mean, variance }
    }
}

pub fn gp_posterior(gp: &LocalGp, x: &[f64]) -> Result<Posterior> {
    if x.len() != gp.params.dimension() {
        return Err(argument("query dimension does not match the surrogate"));
    }
    Ok(gp.posterior(x))
}

fn correlation_matrix(points: &[InputPoint], lengths: &[f64], exponent: u32) -> DMatrix<f64> {
    let n = points.len();
    let mut c = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = unit_correlation(lengths, exponent, &points[i], &points[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Cholesky factor of the unit-amplitude correlation matrix plus the smallest
/// jitter in `MIN_JITTER, 10·MIN_JITTER, .., MAX_JITTER` that succeeds.
pub(crate) fn factorize_correlation(
    points: &[InputPoint],
    lengths: &[f64],
    exponent: u32,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let base = correlation_matrix(points, lengths, exponent);
    let mut jitter = MIN_JITTER;
    while jitter <= MAX_JITTER * (1.0 + 1e-9) {
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Surrogate(format!(
        "correlation matrix of {} points is not positive definite with jitter up to {MAX_JITTER}",
        points.len()
    )))
}

fn amplitude_from(residuals: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    let a = residuals.dot(weights) / residuals.len() as f64;
    if a.is_finite() {
        a.max(AMPLITUDE_FLOOR)
    } else {
        AMPLITUDE_FLOOR
    }
}

/// Maximum-likelihood amplitude `a = rᵀ C⁻¹ r / n` for residuals
/// `r = y* - μ₀(X*)`, floored at [`AMPLITUDE_FLOOR`].
pub fn calibrate_amplitude(
    support: &[(InputPoint, f64)],
    mean: &QuadraticMean,
    lengths: &[f64],
    exponent: u32,
) -> Result<f64> {
    if support.is_empty() {
        return Err(argument("amplitude calibration needs at least one point"));
    }
    let points: Vec<InputPoint> = support.iter().map(|(p, _)| p.clone()).collect();
    let r = DVector::from_iterator(support.len(), support.iter().map(|(p, y)| y - mean.eval(p)));
    let (factor, _) = factorize_correlation(&points, lengths, exponent)?;
    Ok(amplitude_from(&r, &factor.solve(&r)))
}

/// Builds the local surrogate at `x` from the `local_size(d)` nearest stored
/// evaluations, using the lengths and exponent of `base`.
pub fn build_local_surrogate(store: &EvaluationStore, x: &[f64], base: &KernelParams) -> Result<LocalGp> {
    if store.is_empty() {
        return Err(state("evaluation store is empty"));
    }
    if x.len() != store.dimension() || base.dimension() != store.dimension() {
        return Err(argument("surrogate dimension mismatch"));
    }
    let n = local_size(store.dimension());
    let support: Vec<(InputPoint, f64)> = store
        .nearest(x, n)
        .into_iter()
        .map(|(_, i)| (store.point(i).clone(), store.value(i)))
        .collect();
    LocalGp::fit(support, &base.lengths, base.exponent, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn pt(v: &[f64]) -> InputPoint {
        InputPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn local_sizes() {
        assert_eq!(local_size(1), 3);
        assert_eq!(local_size(2), 9);
        assert_eq!(local_size(4), 30);
        assert_eq!(local_size(5), 47);
        assert_eq!(local_size(10), 209);
    }

    #[test]
    fn single_point_closed_form() {
        // One support point (0, y₀), constant mean m, a = 1, l = 1, p = 2:
        // μ(x) = m + e^{-x²}(y₀ - m) and σ²(x) = 1 - e^{-2x²}, up to the jitter.
        let (y0, m) = (2.5, -1.0);
        let mean = QuadraticMean::fit_about(&[pt(&[0.0])], &[m], &[0.0]).unwrap();
        let kp = KernelParams::new(1.0, vec![1.0], 2).unwrap();
        let gp = LocalGp::with_mean(vec![(pt(&[0.0]), y0)], mean, &kp).unwrap();
        let post = gp.posterior(&[1.0]);
        let e1 = (-1.0f64).exp();
        assert!((post.mean - (m + e1 * (y0 - m))).abs() < 1e-9);
        assert!((post.variance - (1.0 - e1 * e1)).abs() < 1e-9);

        // With a fitted mean the constant equals y₀ and the residual vanishes.
        let fitted = LocalGp::fit(vec![(pt(&[0.0]), y0)], &[1.0], 2, &[0.0]).unwrap();
        assert!((fitted.posterior(&[1.0]).mean - y0).abs() < 1e-12);
        assert_eq!(fitted.params().amplitude, AMPLITUDE_FLOOR);
    }

    #[test]
    fn single_point_with_nonzero_residual() {
        // Force a nonzero residual through a mean that cannot represent the data:
        // two far-apart points have C ≈ I, so a ≈ mean of squared residuals.
        let support = vec![(pt(&[0.0]), 1.0), (pt(&[100.0]), 3.0)];
        let mean = QuadraticMean::fit_about(&[pt(&[0.0])], &[2.0], &[0.0]).unwrap();
        let a = calibrate_amplitude(&support, &mean, &[1.0], 2).unwrap();
        assert!((a - 1.0).abs() < 1e-9);

        let single = vec![(pt(&[0.0]), 1.0)];
        let a1 = calibrate_amplitude(&single, &mean, &[1.0], 2).unwrap();
        assert!((a1 - 1.0 / (1.0 + MIN_JITTER)).abs() < 1e-12);
        let doubled = vec![(pt(&[0.0]), 0.0)];
        let a2 = calibrate_amplitude(&doubled, &mean, &[1.0], 2).unwrap();
        assert!((a2 / a1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_residuals_hit_the_floor() {
        let support: Vec<_> = (0..5).map(|i| (pt(&[i as f64]), 3.0)).collect();
        let mean = QuadraticMean::fit_about(&[pt(&[0.0])], &[3.0], &[0.0]).unwrap();
        assert_eq!(calibrate_amplitude(&support, &mean, &[1.0], 1).unwrap(), AMPLITUDE_FLOOR);
    }

    #[test]
    fn interpolates_support_points() {
        let mut r = rng::stream(7, 0);
        let support: Vec<(InputPoint, f64)> = (0..9)
            .map(|_| {
                let x = vec![r.random::<f64>() * 2.0, r.random::<f64>() * 2.0];
                let y = (3.0 * x[0]).sin() * x[1].exp();
                (pt(&x), y)
            })
            .collect();
        let gp = LocalGp::fit(support.clone(), &[0.5, 0.8], 1, &[1.0, 1.0]).unwrap();
        for (x, y) in &support {
            let post = gp.posterior(x);
            assert!((post.mean - y).abs() < 1e-8);
            assert!(post.variance <= 1e-8 * gp.params().amplitude);
        }
    }

    #[test]
    fn far_points_revert_to_the_prior() {
        let support: Vec<(InputPoint, f64)> =
            (0..4).map(|i| (pt(&[i as f64 * 0.3]), (i as f64).powi(3))).collect();
        let gp = LocalGp::fit(support, &[0.2], 2, &[0.5]).unwrap();
        let far = [1e3];
        let post = gp.posterior(&far);
        assert!((post.mean - gp.mean_function().eval(&far)).abs() < 1e-9 * post.mean.abs().max(1.0));
        assert!((post.variance - gp.params().amplitude).abs() < 1e-12);
    }

    #[test]
    fn builds_from_the_store_deterministically() {
        let mut store = EvaluationStore::new(2);
        let mut r = rng::stream(9, 0);
        for _ in 0..5 {
            let x = vec![r.random::<f64>(), r.random::<f64>()];
            let y = x[0] + x[1] * x[1];
            store.insert(pt(&x), y).unwrap();
        }
        let base = KernelParams::new(1.0, vec![1.0, 1.0], 1).unwrap();
        let gp = build_local_surrogate(&store, &[0.5, 0.5], &base).unwrap();
        assert_eq!(gp.support().len(), 5);
        let again = build_local_surrogate(&store, &[0.5, 0.5], &base).unwrap();
        assert_eq!(gp.posterior(&[0.3, 0.9]), again.posterior(&[0.3, 0.9]));
        assert!(build_local_surrogate(&EvaluationStore::new(2), &[0.0, 0.0], &base).is_err());
    }
}
