//! All randomness flows from a single root seed, split per stage by hashing
//! the stage name, and further split per stream index. The scheme is
//! stage-name-keyed so adding a stage never shifts another stage's streams.

use sha2::{Digest, Sha256};

/// Seed for a named pipeline stage: first 8 LE bytes of
/// `sha256(root_seed_le || stage_name)`.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Sub-stream of a stage seed (e.g. one per episode or task).
pub fn stream_seed(stage: u64, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(stage.to_le_bytes());
    for &i in indices {
        h.update(i.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
