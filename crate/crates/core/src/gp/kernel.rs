use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

/// Parameters of `K(x, x') = a·exp(-Σ_i |x_i - x'_i|^p / l_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub amplitude: f64,
    pub lengths: Vec<f64>,
    pub exponent: u32,
}

impl KernelParams {
    pub fn new(amplitude: f64, lengths: Vec<f64>, exponent: u32) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(argument("kernel amplitude must be positive"));
        }
        if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(argument("kernel lengths must be positive"));
        }
        if !(exponent == 1 || exponent == 2) {
            return Err(argument(format!("kernel exponent must be 1 or 2, got {exponent}")));
        }
        Ok(KernelParams { amplitude, lengths, exponent })
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    /// Kernel with unit amplitude.
    pub(crate) fn correlation(&self, x: &[f64], y: &[f64]) -> f64 {
        unit_correlation(&self.lengths, self.exponent, x, y)
    }
}

pub(crate) fn unit_correlation(lengths: &[f64], exponent: u32, x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = if exponent == 1 {
        x.iter().zip(y).zip(lengths).map(|((a, b), l)| (a - b).abs() / l).sum()
    } else {
        x.iter().zip(y).zip(lengths).map(|((a, b), l)| (a - b) * (a - b) / l).sum()
    };
    (-s).exp()
}

pub fn kernel_eval(kp: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != kp.dimension() || y.len() != kp.dimension() {
        return Err(argument("kernel input dimension mismatch"));
    }
    Ok(kp.amplitude * kp.correlation(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let kp = KernelParams::new(1.0, vec![1.0, 1.0], 1).unwrap();
        assert_eq!(kernel_eval(&kp, &[0.3, 0.1], &[0.3, 0.1]).unwrap(), 1.0);
        let v = kernel_eval(&kp, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.135_335_283_236_612_7).abs() < 1e-12);

        let kp = KernelParams::new(1.0, vec![2.0, 1.0], 2).unwrap();
        let v = kernel_eval(&kp, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 0.223_130_160_148_429_8).abs() < 1e-12);

        let kp = KernelParams::new(3.5, vec![0.7], 2).unwrap();
        assert_eq!(kernel_eval(&kp, &[2.0], &[2.0]).unwrap(), 3.5);
        assert_eq!(
            kernel_eval(&kp, &[2.0], &[-1.0]).unwrap(),
            kernel_eval(&kp, &[-1.0], &[2.0]).unwrap()
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(KernelParams::new(0.0, vec![1.0], 1).is_err());
        assert!(KernelParams::new(1.0, vec![-1.0], 1).is_err());
        assert!(KernelParams::new(1.0, vec![1.0], 3).is_err());
        let kp = KernelParams::new(1.0, vec![1.0], 1).unwrap();
        assert!(kernel_eval(&kp, &[1.0, 2.0], &[1.0]).is_err());
    }
}
