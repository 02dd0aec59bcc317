//! Counter-style random streams: every path owns its own ChaCha stream, so a
//! path's draws never depend on batch layout or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream for the Gaussian draws of path group `g` (antithetic pairs share one).
pub fn gaussian_stream(seed: u64, g: u64) -> ChaCha8Rng {
    stream(seed, g << 1)
}

/// Stream for the jump draws of path `p`.
pub fn jump_stream(seed: u64, p: u64) -> ChaCha8Rng {
    stream(seed, (p << 1) | 1)
}

/// Auxiliary streams (optimizers, resampling) kept apart from path streams.
pub fn aux_stream(seed: u64, id: u64) -> ChaCha8Rng {
    stream(seed ^ 0x9e37_79b9_7f4a_7c15, id)
}
