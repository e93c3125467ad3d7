//! Deterministic stream derivation: every random consumer gets its own
//! ChaCha8 generator keyed by SHA-256 of the master seed plus stream tags,
//! so adding or reordering consumers never shifts another stream's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub(crate) mod stream {
    pub const INIT: u64 = 0x11;
    pub const SHUFFLE: u64 = 0x12;
    pub const DROPOUT: u64 = 0x13;
    pub const CONTAINER: u64 = 0x21;
    pub const WINDOW: u64 = 0x22;
}

pub(crate) fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for tag in tags {
        hasher.update(tag.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
