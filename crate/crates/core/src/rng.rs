//! Seeded random streams.
//!
//! Every run derives independent ChaCha streams from one seed so that, for
//! example, drawing an initial design never shifts the chain's random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream carrying the Markov chain's proposal and acceptance draws.
pub const CHAIN_STREAM: u64 = 0;
/// Stream used to search for the chain's starting point.
pub const START_STREAM: u64 = 1;
/// Stream used for the surrogate's initial design.
pub const DESIGN_STREAM: u64 = 2;
/// Stream used by plain Monte Carlo.
pub const MONTE_CARLO_STREAM: u64 = 3;
/// Stream used by the pilot sample that sizes the output range.
pub const PILOT_STREAM: u64 = 4;

pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
