//! Deterministic random streams keyed by (seed, unit, step).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for one work unit at one step. The result does not depend
/// on which thread draws from it.
pub fn stream(seed: u64, unit: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h = splitmix64(seed);
    for (i, word) in [unit, step, 0x5EED, 0xC0DE].into_iter().enumerate() {
        h = splitmix64(h ^ word.wrapping_mul(0xD1B5_4A32_D192_ED03));
        key[8 * i..8 * i + 8].copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
