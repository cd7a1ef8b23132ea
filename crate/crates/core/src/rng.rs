//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by the run
//! seed and a label, so results do not depend on the order in which work
//! items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn label_hash(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Independent stream for `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

/// A child seed for `label`, for APIs that take a seed rather than a stream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    substream(seed, label).next_u64()
}
