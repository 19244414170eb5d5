//! Seeding. Every random stream is a ChaCha8 generator, so sample sets and
//! random restarts are bit-reproducible across platforms. Sub-seeds for
//! pipeline stages are derived by hashing the parent seed with a label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// First 8 bytes (little endian) of `SHA-256(seed_le || label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Independent stream `index` of the generator seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = seeded(seed);
    rng.set_stream(index);
    rng
}
