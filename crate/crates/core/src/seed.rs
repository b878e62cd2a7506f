//! Per-realization random streams.
//!
//! Realization `i` of a run with master seed `m` draws from a ChaCha8 stream
//! keyed by `realization_seed(m, i)`, so results do not depend on how
//! realizations are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream carrying the Gaussian coefficient draw.
pub const HAMILTONIAN_STREAM: u64 = 0;
/// Stream carrying the random probe energies.
pub const ENERGY_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of realization `index`.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
