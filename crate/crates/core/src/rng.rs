//! Seeded random streams. One master seed fans out into independent ChaCha8
//! streams, one per traffic flow plus one for the channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Recorded in every report so runs can be reproduced.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64 + set_stream";

pub const CHANNEL_STREAM: u64 = 0;

/// Stream id for the `index`-th flow of a scenario.
pub fn flow_stream(index: usize) -> u64 {
    1 + index as u64
}

pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
