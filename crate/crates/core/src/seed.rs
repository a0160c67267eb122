//! Seed fan-out: every subsystem draws from `derive_seed(root, tag)`, the first
//! eight bytes (little-endian) of `SHA-256(root_le || tag)`.

use sha2::{Digest, Sha256};

pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
