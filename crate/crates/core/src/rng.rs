//! Deterministic random streams keyed by `(master seed, robot, tick)`.
//!
//! Each robot draws from its own ChaCha8 stream per tick, so results do not
//! depend on the order in which robots are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream label reserved for world initialization.
pub const INIT_STREAM: u64 = u64::MAX;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key derived from the three stream coordinates.
pub fn stream_seed(master: u64, stream: u64, tick: u64) -> [u8; 32] {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.rotate_left(17));
    let c = splitmix64(b ^ tick.rotate_left(41));
    let d = splitmix64(c ^ 0xD1B5_4A32_D192_ED03);
    let mut seed = [0u8; 32];
    for (chunk, word) in seed.chunks_exact_mut(8).zip([a, b, c, d]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    seed
}

pub fn stream(master: u64, stream: u64, tick: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(master, stream, tick))
}

pub fn robot_stream(master: u64, robot: usize, tick: u64) -> ChaCha8Rng {
    stream(master, robot as u64, tick)
}
