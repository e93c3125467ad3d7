//! Content digests used to stamp datasets and models with the exact
//! configuration that produced them.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 hex digest of a value's compact JSON serialization.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("digest input must serialize");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let out = hasher.finalize();
    let mut hex = String::with_capacity(out.len() * 2);
    for byte in out {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").unwrap();
    }
    hex
}
