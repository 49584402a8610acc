//! The single source of randomness: ChaCha8 seeded from a 64-bit integer.
//!
//! ChaCha8's output stream is fixed by its specification, so a seed produces
//! the same values on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DetRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}
