//! Local Gaussian-process regression.
//!
//! A surrogate at a query point `x` is fit only to the `n` stored evaluations
//! nearest to `x`, with a quadratic prior mean fitted by least squares and an
//! anisotropic kernel `a·exp(-Σ |x_i - x'_i|^p / l_i)`. The lengths `l` are
//! calibrated once from the initial design; the amplitude `a` is re-estimated
//! at every local build.

mod calibrate;
mod kernel;
mod local;
mod mean;
mod store;

pub use calibrate::{calibrate_lengthscales, lengthscale_grid, GRID_POINTS};
pub use kernel::{kernel_eval, KernelParams};
pub use local::{
    build_local_surrogate, calibrate_amplitude, gp_posterior, local_size, LocalGp, Posterior,
    AMPLITUDE_FLOOR, MAX_JITTER, MIN_JITTER,
};
pub use mean::{fit_quadratic_mean, quadratic_basis_size, MeanDegree, QuadraticMean};
pub use store::{nearest_neighbors, EvaluationStore, DUPLICATE_TOLERANCE};
