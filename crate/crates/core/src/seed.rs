//! Stable seed derivation.
//!
//! Every random stream in the crate is keyed by `(master, label, index)`. The
//! label is hashed with 64-bit FNV-1a and mixed with the master seed and index
//! through the SplitMix64 finalizer, so derived seeds never depend on thread
//! scheduling or on the order in which streams are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for stream `label[index]` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a(label.as_bytes()));
    splitmix64(h ^ splitmix64(index))
}

/// The crate-wide generator, seeded from a derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // frozen values guard against accidental changes to the hash
        assert_eq!(fnv1a(b""), FNV_OFFSET);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(derive_seed(1, "x", 0), derive_seed(1, "x", 0));
    }

    #[test]
    fn labels_and_indices_separate_streams() {
        let a = derive_seed(42, "schedule", 0);
        assert_ne!(a, derive_seed(42, "schedule", 1));
        assert_ne!(a, derive_seed(42, "walk", 0));
        assert_ne!(a, derive_seed(43, "schedule", 0));
    }
}
