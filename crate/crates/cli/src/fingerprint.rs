//! Content fingerprints for model and dataset files.
//!
//! SHA-256 over the raw file bytes, rendered as `sha256:<lowercase hex>`.
//! Profile artifacts embed the model fingerprint so a stale or swapped
//! model cannot silently receive another model's exit configuration.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(7 + digest.len() * 2);
    out.push_str("sha256:");
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn fingerprint_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("fingerprinting {}", path.display()))?;
    Ok(fingerprint_bytes(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        // SHA-256 of the empty input.
        assert_eq!(
            fingerprint_bytes(b""),
            "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn single_byte_change_changes_fingerprint() {
        let a = fingerprint_bytes(b"model-bytes");
        let b = fingerprint_bytes(b"model-byteX");
        assert_ne!(a, b);
    }
}
