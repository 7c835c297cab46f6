//! Seeded random streams.
//!
//! Each consumer pulls its own named substream so that adding draws in one
//! place never shifts the sequence seen by another. Substream seeds are the
//! SHA-256 of `(seed, name, index)`, so they are stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub const DEMAND: &str = "demand";
pub const PERTURBATION: &str = "perturbation";
pub const RESTORATION: &str = "restoration";
pub const PRICING_DISCARD: &str = "pricing-discard";
pub const TRAINING: &str = "training";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, name: &str) -> Stream {
        self.indexed(name, 0)
    }

    pub fn indexed(&self, name: &str, index: u64) -> Stream {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update(index.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}
