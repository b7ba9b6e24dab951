//! Deterministic per-trajectory random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Counter-based stream `index` of the master seed.
///
/// ChaCha's 64-bit stream id selects a disjoint keystream, so stream `i` is the
/// same no matter which thread consumes it or in what order.
pub fn seed_stream(master_seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an unrelated master seed for a named sub-experiment.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let mut h = master_seed ^ 0x9E37_79B9_7F4A_7C15;
    for byte in label.bytes() {
        h = splitmix64(h ^ u64::from(byte));
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n` independent trajectories in parallel and returns their results in
/// trajectory order. Trajectory `i` always receives `seed_stream(master_seed, i)`.
pub fn par_trajectories<T, F>(n: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Rng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed_stream(master_seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
