//! Content digests of serializable values.
//!
//! Values are converted to `serde_json::Value` first; its object maps are
//! sorted by key, so the digest does not depend on field order in the input.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    serde_json::to_string(&v).expect("JSON value prints")
}

/// Hex SHA-256 of the canonical JSON form.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_order_does_not_matter() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b": 1, "a": [1, 2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a": [1, 2], "b": 1}"#).unwrap();
        assert_eq!(digest(&a), digest(&b));
        assert_eq!(digest(&a).len(), 64);
    }
}
