//! Reproducible random streams.
//!
//! Every trajectory owns a ChaCha stream whose seed is a keyed hash of
//! `(master_seed, index)`. Adding trajectories to an ensemble never perturbs
//! the streams of the existing ones, and no generator state is shared.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Generator used for every path and trajectory.
pub type StreamRng = ChaCha12Rng;

const SEED_DOMAIN: &[u8] = b"shearlab/trajectory-seed/v1";

/// Seed of trajectory `index` within an ensemble keyed by `master_seed`.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(SEED_DOMAIN);
    hasher.update(master_seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(7, 0);
        assert_eq!(a, derive_seed(7, 0));
        assert_ne!(a, derive_seed(7, 1));
        assert_ne!(a, derive_seed(8, 0));
    }

    #[test]
    fn streams_replay() {
        let mut r1 = stream(42);
        let mut r2 = stream(42);
        for _ in 0..100 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }
}
