//! The three benchmark performance models.
//!
//! - [`MinDistance`]: squared distance to the nearer of two points, minus one, with
//!   standard normal inputs.
//! - [`Beam`]: tip deflection of a cantilever beam with five normal inputs.
//! - [`PoissonKl`]: the head at one point of a Poisson problem whose
//!   log-normal conductivity is a truncated Karhunen–Loève expansion.

mod beam;
mod kl;
mod min_distance;
mod pde;
mod poisson;

pub use beam::{beam_eval, Beam, BEAM_LENGTH, PRINTED_E_MEAN, REPRODUCING_E_MEAN};
pub use kl::{cache_path, kl_decompose, load_or_compute, realize_field, KlBasis};
pub use min_distance::MinDistance;
pub use pde::{PoissonKl, PoissonKlSpec};
pub use poisson::{fourier_center_value, solve_poisson, Grid, PoissonSolution};
