//! Seeded random streams. One ChaCha generator per seed; independent
//! purposes draw from separate stream numbers of the same key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Shuffle = 1,
    Split = 2,
    Data = 3,
}

/// The base stream for `seed`.
pub fn set_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = set_seed(seed);
    rng.set_stream(which as u64);
    rng
}
