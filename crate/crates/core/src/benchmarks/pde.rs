use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::kl::{kl_decompose, load_or_compute, realize_field, KlBasis};
use super::poisson::{solve_poisson, Grid};
use crate::error::{argument, Result};
use crate::problem::{IndependentNormal, InputPoint, PerformanceModel};

/// Settings of the random-conductivity Poisson problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonKlSpec {
    /// Cells per side of the solver and KL grid.
    pub cells: usize,
    /// Conductivity scale `a₀`.
    pub a0: f64,
    /// Correlation parameter `Δ` of `exp(-‖x - x'‖²/Δ)`.
    pub corr_length: f64,
    /// Number of KL modes `J`, which is the input dimension.
    pub modes: usize,
    pub forcing: f64,
    /// Where the head is observed.
    pub observation: [f64; 2],
}

impl Default for PoissonKlSpec {
    fn default() -> Self {
        PoissonKlSpec { cells: 65, a0: 1.0, corr_length: 0.6, modes: 10, forcing: 1.0, observation: [0.5, 0.5] }
    }
}

impl PoissonKlSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 8 {
            return Err(argument("the Poisson grid needs at least 8 cells per side"));
        }
        if self.modes == 0 || self.modes > self.cells * self.cells {
            return Err(argument("KL mode count must lie between 1 and the cell count"));
        }
        if !(self.a0 > 0.0) || !(self.corr_length > 0.0) || !self.forcing.is_finite() {
            return Err(argument("a0 and the correlation length must be positive, forcing finite"));
        }
        if self.observation.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(argument("the observation point must lie in the unit square"));
        }
        Ok(())
    }
}

/// Head `u(x*)` for the conductivity `a₀·exp(Σ c_j √λ_j ξ_j)` with standard
/// normal KL coefficients `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonKl {
    spec: PoissonKlSpec,
    basis: KlBasis,
    grid: Grid,
    prior: IndependentNormal,
}

impl PoissonKl {
    pub fn new(spec: PoissonKlSpec) -> Result<Self> {
        spec.validate()?;
        let basis = kl_decompose(spec.cells, spec.corr_length, spec.modes)?;
        Self::with_basis(spec, basis)
    }

    /// Like [`PoissonKl::new`], reusing a basis cached in `dir` when present.
    pub fn cached(spec: PoissonKlSpec, dir: &Path) -> Result<Self> {
        spec.validate()?;
        let basis = load_or_compute(dir, spec.cells, spec.corr_length, spec.modes)?;
        Self::with_basis(spec, basis)
    }

    pub fn with_basis(spec: PoissonKlSpec, basis: KlBasis) -> Result<Self> {
        spec.validate()?;
        if basis.cells() != spec.cells || basis.len() != spec.modes {
            return Err(argument("KL basis does not match the problem settings"));
        }
        let grid = Grid::new(spec.cells)?;
        let prior = IndependentNormal::standard(spec.modes);
        Ok(PoissonKl { spec, basis, grid, prior })
    }

    pub fn spec(&self) -> &PoissonKlSpec {
        &self.spec
    }

    pub fn basis(&self) -> &KlBasis {
        &self.basis
    }

    pub fn eval(&self, c: &[f64]) -> Result<f64> {
        let a = realize_field(&self.basis, c, self.spec.a0)?;
        let u = solve_poisson(&a, self.grid, self.spec.forcing)?;
        u.interpolate(self.spec.observation[0], self.spec.observation[1])
    }
}

impl PerformanceModel for PoissonKl {
    fn name(&self) -> &str {
        "poisson_kl"
    }

    fn dimension(&self) -> usize {
        self.spec.modes
    }

    fn performance(&self, c: &[f64]) -> Result<f64> {
        self.eval(c)
    }

    fn log_prior(&self, c: &[f64]) -> f64 {
        self.prior.log_density(c)
    }

    fn draw_prior(&self, rng: &mut dyn RngCore) -> InputPoint {
        self.prior.draw(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::fourier_center_value;
    use crate::problem::sample_prior;
    use crate::rng;

    #[test]
    fn zero_coefficients_reproduce_the_unit_solve() {
        let model = PoissonKl::new(PoissonKlSpec::default()).unwrap();
        let y = model.eval(&[0.0; 10]).unwrap();
        assert!((y - fourier_center_value(2000)).abs() < 1e-3);
        assert_eq!(y.to_bits(), model.eval(&[0.0; 10]).unwrap().to_bits());
    }

    #[test]
    fn prior_outputs_fall_in_the_output_range() {
        let spec = PoissonKlSpec { cells: 33, ..PoissonKlSpec::default() };
        let model = PoissonKl::new(spec).unwrap();
        let draws = sample_prior(&model, &mut rng::stream(1, rng::MONTE_CARLO_STREAM), 1000).unwrap();
        for c in draws {
            let y = model.eval(&c).unwrap();
            assert!((-2.0..=0.0).contains(&y), "{y}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(PoissonKl::new(PoissonKlSpec { cells: 7, ..PoissonKlSpec::default() }).is_err());
        assert!(PoissonKl::new(PoissonKlSpec { observation: [0.5, 1.5], ..PoissonKlSpec::default() }).is_err());
        let basis = kl_decompose(9, 0.6, 10).unwrap();
        assert!(PoissonKl::with_basis(PoissonKlSpec::default(), basis).is_err());
    }
}
