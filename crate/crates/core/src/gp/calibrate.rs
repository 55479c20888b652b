//! Correlation-length calibration from the initial design.
//!
//! Lengths are chosen by coordinate-wise grid search on the profile marginal
//! likelihood (amplitude maximized out) with a quadratic least-squares mean.
//! Each coordinate's grid holds [`GRID_POINTS`] log-spaced values spanning
//! `[0.01, 100] × s_i^p`, where `s_i` is the coordinate's sample standard
//! deviation and `p` the kernel exponent, so the grid moves with the inputs'
//! scale exactly as the lengths do.

use nalgebra::DVector;

use super::local::factorize_correlation;
use super::mean::QuadraticMean;
use crate::error::{argument, Result};
use crate::problem::InputPoint;

pub const GRID_POINTS: usize = 13;
const SWEEPS: usize = 2;

/// Candidate lengths for a coordinate with spread `spread`.
pub fn lengthscale_grid(spread: f64, exponent: u32) -> Vec<f64> {
    let base = spread.powi(exponent as i32);
    (0..GRID_POINTS)
        .map(|k| base * 10f64.powf(-2.0 + 4.0 * k as f64 / (GRID_POINTS - 1) as f64))
        .collect()
}

pub fn calibrate_lengthscales(data: &[(InputPoint, f64)], exponent: u32) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(argument("length calibration needs at least two points"));
    }
    if !(exponent == 1 || exponent == 2) {
        return Err(argument("kernel exponent must be 1 or 2"));
    }
    let d = data[0].0.len();
    let n = data.len() as f64;
    let points: Vec<InputPoint> = data.iter().map(|(p, _)| p.clone()).collect();
    let values: Vec<f64> = data.iter().map(|(_, y)| *y).collect();

    let centroid: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    let spreads: Vec<f64> = (0..d)
        .map(|k| (points.iter().map(|p| (p[k] - centroid[k]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let fallback = || -> Vec<f64> {
        (0..d)
            .map(|k| {
                let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                });
                let range = hi - lo;
                if range > 0.0 { range.powi(exponent as i32) } else { 1.0 }
            })
            .collect()
    };

    let (ymin, ymax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if ymax - ymin <= 1e-14 * ymax.abs().max(ymin.abs()).max(1.0) {
        return Ok(fallback());
    }
    let mean = QuadraticMean::fit_about(&points, &values, &centroid)?;
    let residuals = DVector::from_iterator(points.len(), points.iter().zip(&values).map(|(p, y)| y - mean.eval(p)));
    if residuals.amax() <= 1e-12 * (ymax - ymin) {
        return Ok(fallback());
    }

    let grids: Vec<Vec<f64>> = spreads
        .iter()
        .map(|&s| lengthscale_grid(if s > 0.0 { s } else { 1.0 }, exponent))
        .collect();
    let objective = |lengths: &[f64]| -> f64 {
        match factorize_correlation(&points, lengths, exponent) {
            Ok((factor, _)) => {
                let quad = residuals.dot(&factor.solve(&residuals));
                let log_det: f64 = 2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                n * (quad / n).ln() + log_det
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut choice = vec![GRID_POINTS / 2; d];
    let mut lengths: Vec<f64> = (0..d).map(|k| grids[k][choice[k]]).collect();
    let mut best = objective(&lengths);
    for _ in 0..SWEEPS {
        for k in 0..d {
            for g in 0..GRID_POINTS {
                if g == choice[k] {
                    continue;
                }
                let mut trial = lengths.clone();
                trial[k] = grids[k][g];
                let value = objective(&trial);
                if value < best {
                    best = value;
                    choice[k] = g;
                    lengths = trial;
                }
            }
        }
    }
    Ok(lengths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_four_decades() {
        let g = lengthscale_grid(2.0, 1);
        assert_eq!(g.len(), GRID_POINTS);
        assert!((g[0] - 0.02).abs() < 1e-15);
        assert!((g[GRID_POINTS - 1] - 200.0).abs() < 1e-9);
        assert!((g[6] - 2.0).abs() < 1e-12);
        let g2 = lengthscale_grid(2.0, 2);
        assert!((g2[6] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_falls_back_to_ranges() {
        let data: Vec<(InputPoint, f64)> = (0..10)
            .map(|i| (InputPoint::new(vec![i as f64, 0.5 * i as f64 - 1.0]).unwrap(), 3.0))
            .collect();
        let l = calibrate_lengthscales(&data, 1).unwrap();
        assert_eq!(l, vec![9.0, 4.5]);
        let l2 = calibrate_lengthscales(&data, 2).unwrap();
        assert_eq!(l2, vec![81.0, 20.25]);
    }

    /// Draws a zero-mean GP sample with unit amplitude at uniform points on
    /// `[0, 4]²`.
    fn synthetic_gp(lengths: &[f64], exponent: u32, n: usize, seed: u64) -> Vec<(InputPoint, f64)> {
        use crate::rng;
        use nalgebra::DMatrix;
        use rand::Rng;
        use rand_distr::{Distribution, StandardNormal};

        let mut r = rng::stream(seed, 0);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![4.0 * r.random::<f64>(), 4.0 * r.random::<f64>()]).collect();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..2).map(|c| (pts[i][c] - pts[j][c]).abs().powi(exponent as i32) / lengths[c]).sum();
                k[(i, j)] = (-s).exp();
            }
            k[(i, i)] += 1e-10;
        }
        let l = k.cholesky().unwrap().unpack();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut r)));
        let y = l * z;
        pts.into_iter().zip(y.iter()).map(|(p, &v)| (InputPoint::new(p).unwrap(), v)).collect()
    }

    fn within_one_step(found: f64, truth: f64) -> bool {
        (found / truth).log10().abs() <= 1.0 / 3.0 + 1e-9
    }

    #[test]
    fn recovers_known_lengths() {
        let data = synthetic_gp(&[1.0, 1.0], 1, 200, 11);
        let l = calibrate_lengthscales(&data, 1).unwrap();
        assert!(l.iter().all(|&v| within_one_step(v, 1.0)), "{l:?}");
    }

    #[test]
    fn input_scaling_scales_lengths() {
        for p in [1u32, 2] {
            let data = synthetic_gp(&[1.0, 1.0], p, 120, 5);
            let scaled: Vec<(InputPoint, f64)> = data
                .iter()
                .map(|(x, y)| (InputPoint::new(x.iter().map(|v| 2.0 * v).collect()).unwrap(), *y))
                .collect();
            let l = calibrate_lengthscales(&data, p).unwrap();
            let l2 = calibrate_lengthscales(&scaled, p).unwrap();
            let factor = 2f64.powi(p as i32);
            for (a, b) in l.iter().zip(&l2) {
                assert!(within_one_step(*b, a * factor), "p={p}: {a} -> {b}");
            }
        }
    }

    #[test]
    fn rejects_tiny_designs() {
        let data = vec![(InputPoint::new(vec![0.0]).unwrap(), 1.0)];
        assert!(calibrate_lengthscales(&data, 1).is_err());
    }
}
