//! SHA-256 helpers shared by sample ids, cache keys, and config digests.

use sha2::{Digest, Sha256};

/// Hex digest of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Hex digest of a sequence of length-prefixed fields.
///
/// Length prefixes keep the encoding injective: `["ab", "c"]` and
/// `["a", "bc"]` hash differently.
pub fn sha256_fields(fields: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for field in fields {
        hasher.update((field.len() as u64).to_be_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Shortest decimal representation of a float that round-trips exactly.
///
/// Used wherever real numbers feed a digest, so that semantically equal
/// configs hash identically regardless of how they were written.
pub fn canonical_f64(value: f64) -> String {
    format!("{value}")
}
