use rand::RngCore;

use crate::error::{argument, Result};
use crate::problem::{IndependentNormal, InputPoint, PerformanceModel};

pub const BEAM_LENGTH: f64 = 100.0;
/// Elastic-modulus mean that reproduces the reported output moments.
pub const REPRODUCING_E_MEAN: f64 = 2.9e7;
/// Elastic-modulus mean as printed in the parameter table.
pub const PRINTED_E_MEAN: f64 = 2.9e6;

const MEANS: [f64; 4] = [4.0, 4.0, 500.0, 1000.0];
const VARIANCES: [f64; 5] = [0.001, 0.0001, 100.0, 100.0, 1.45e6];

/// Tip deflection `4L³/(E w t) · √((Y/t²)² + (X/w²)²)`.
pub fn beam_eval(w: f64, t: f64, x: f64, y: f64, e: f64, length: f64) -> Result<f64> {
    if !(w > 0.0 && t > 0.0 && e > 0.0) {
        return Err(argument(format!("beam width, height and modulus must be positive, got w={w}, t={t}, E={e}")));
    }
    let load = ((y / (t * t)).powi(2) + (x / (w * w)).powi(2)).sqrt();
    Ok(4.0 * length.powi(3) / (e * w * t) * load)
}

/// Cantilever beam with independent normal `(w, t, X, Y, E)`.
///
/// The chain runs in standardized coordinates `z`, with physical inputs
/// `μ + σ ⊙ z`, so one proposal scale suits all five parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    physical: IndependentNormal,
    standard: IndependentNormal,
    length: f64,
}

impl Beam {
    pub fn new(e_mean: f64) -> Result<Self> {
        if !(e_mean > 0.0) {
            return Err(argument("elastic modulus mean must be positive"));
        }
        let mut means = MEANS.to_vec();
        means.push(e_mean);
        Ok(Beam {
            physical: IndependentNormal::new(means, &VARIANCES)?,
            standard: IndependentNormal::standard(5),
            length: BEAM_LENGTH,
        })
    }

    /// Physical `(w, t, X, Y, E)` for standardized coordinates `z`.
    pub fn physical(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.physical.means())
            .zip(self.physical.std_devs())
            .map(|((zi, m), s)| m + s * zi)
            .collect()
    }

    pub fn means(&self) -> &[f64] {
        self.physical.means()
    }
}

impl Default for Beam {
    fn default() -> Self {
        Beam::new(REPRODUCING_E_MEAN).expect("default modulus is valid")
    }
}

impl PerformanceModel for Beam {
    fn name(&self) -> &str {
        "beam"
    }

    fn dimension(&self) -> usize {
        5
    }

    fn performance(&self, z: &[f64]) -> Result<f64> {
        let p = self.physical(z);
        beam_eval(p[0], p[1], p[2], p[3], p[4], self.length)
    }

    fn log_prior(&self, z: &[f64]) -> f64 {
        self.standard.log_density(z)
    }

    fn draw_prior(&self, rng: &mut dyn RngCore) -> InputPoint {
        self.standard.draw(rng)
    }
}
