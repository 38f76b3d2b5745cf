//! Seeded randomness. Every stochastic step in the crate draws from a
//! [`SeededRng`] built by [`seeded`], so results are a pure function of the seed.

use rand::SeedableRng;

pub use rand::Rng;
pub use rand_distr::StandardNormal;

pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}
