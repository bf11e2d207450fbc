//! Deterministic per-trajectory random streams.
//!
//! Each trajectory owns a ChaCha8 stream keyed by
//! `SHA-256(tag ‖ master_seed ‖ index)`, so results do not depend on how
//! trajectories are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN_TAG: &[u8] = b"qtrack/trajectory/v1";

/// 256-bit seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(trajectory_seed(master_seed, index))
}
