//! Named, seed-derived random substreams.
//!
//! Every consumer of randomness (initialization, shuffling, stratified
//! sampling, pair subsampling, generation) asks for its own stream by name so
//! that adding draws in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn substream(seed: u64, name: &str, index: u64) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}
