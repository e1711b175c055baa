//! Seed derivation.
//!
//! Every random draw in a run descends from one root seed. Child seeds are
//! derived by hashing the parent seed together with a label path, so
//! independent consumers never share a stream and adding a consumer does not
//! shift the draws of any other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child node for `label`.
    pub fn child(&self, label: &str) -> SeedTree {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        SeedTree { seed: u64::from_le_bytes(bytes) }
    }

    /// Child node for an indexed label, e.g. `("repeat", 3)`.
    pub fn child_indexed(&self, label: &str, index: u64) -> SeedTree {
        self.child(&format!("{label}#{index}"))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Uniform draw in `[0, 1)` that is a pure function of `(seed, key)`.
pub fn unit_hash(seed: u64, key: &str) -> f64 {
    let child = SeedTree::new(seed).child(key);
    // 53 high bits give a uniformly spaced double.
    (child.seed() >> 11) as f64 / (1u64 << 53) as f64
}
