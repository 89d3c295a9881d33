//! Seed derivation. Every random object is keyed by a master seed plus a
//! path of integer indices (trial, alpha index, ...), so results do not
//! depend on the order in which tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `master`. Distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &k| splitmix(acc ^ splitmix(k.wrapping_add(GOLDEN))))
}

/// Generator for one row (or any other cell group) of a random object.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
