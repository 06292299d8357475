//! Deterministic random streams.
//!
//! Every trial gets its own ChaCha8 generator keyed by the run seed plus a
//! few integer coordinates and using the trial index as the stream id, so
//! results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed together with coordinates into a single key.
pub fn derive_key(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc.wrapping_add(splitmix64(c.wrapping_add(1)))))
}

pub fn stream_rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Generator for trial `trial` of the grid point identified by `coords`.
pub fn trial_rng(seed: u64, coords: &[u64], trial: u64) -> ChaCha8Rng {
    stream_rng(derive_key(seed, coords), trial)
}
