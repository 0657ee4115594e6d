//! Canonical serialization: compact JSON with lexicographically sorted object
//! keys. Used for transaction signing bytes, state roots, block hashes and
//! redaction commitments.
//!
//! `serde_json`'s default `Map` is a `BTreeMap`, so converting to a
//! [`serde_json::Value`] first and then serializing yields key-sorted bytes
//! regardless of struct field order. Floats are rejected: nothing that feeds
//! a digest may carry a non-integer number.

use serde::Serialize;
use serde_json::Value;

use crate::crypto::{sha256, Hash32};
use crate::error::{Error, ErrorCode, Result};

/// Converts any serializable value into a canonical JSON value, rejecting
/// floating-point numbers anywhere in the tree.
pub fn to_canonical_value<T: Serialize>(value: &T) -> Result<Value> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::new(ErrorCode::BadArgs, format!("serialization failed: {e}")))?;
    check_no_floats(&v)?;
    Ok(v)
}

/// Canonical byte encoding of a value: compact JSON, keys sorted.
pub fn canonical_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = to_canonical_value(value)?;
    serde_json::to_vec(&v)
        .map_err(|e| Error::new(ErrorCode::BadArgs, format!("encoding failed: {e}")))
}

/// SHA-256 digest of the canonical byte encoding.
pub fn canonical_digest<T: Serialize>(value: &T) -> Result<Hash32> {
    Ok(Hash32::from(sha256(&canonical_json_bytes(value)?)))
}

fn check_no_floats(value: &Value) -> Result<()> {
    match value {
        Value::Number(n) if n.as_i64().is_none() && n.as_u64().is_none() => Err(Error::new(
            ErrorCode::BadArgs,
            format!("non-integer number {n} not allowed in canonical data"),
        )),
        Value::Array(items) => items.iter().try_for_each(check_no_floats),
        Value::Object(map) => map.values().try_for_each(check_no_floats),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn keys_are_sorted_regardless_of_insertion_order() {
        let mut a = HashMap::new();
        a.insert("zulu", 1u64);
        a.insert("alpha", 2u64);
        let mut b = HashMap::new();
        b.insert("alpha", 2u64);
        b.insert("zulu", 1u64);
        assert_eq!(
            canonical_json_bytes(&a).unwrap(),
            canonical_json_bytes(&b).unwrap()
        );
        assert_eq!(
            canonical_json_bytes(&a).unwrap(),
            br#"{"alpha":2,"zulu":1}"#.to_vec()
        );
    }

    #[test]
    fn floats_are_rejected() {
        let v = serde_json::json!({"x": 1.5});
        assert!(canonical_json_bytes(&v).is_err());
        let nested = serde_json::json!({"a": [1, {"b": 2.25}]});
        assert!(canonical_json_bytes(&nested).is_err());
    }

    #[test]
    fn digest_is_stable() {
        let bytes = canonical_json_bytes(&serde_json::json!({"k": "v"})).unwrap();
        assert_eq!(bytes, br#"{"k":"v"}"#.to_vec());
    }

    proptest! {
        // decode(encode(x)) == x for canonical JSON trees without floats
        #[test]
        fn roundtrip(v in arb_value(3)) {
            let bytes = canonical_json_bytes(&v).unwrap();
            let back: Value = serde_json::from_slice(&bytes).unwrap();
            prop_assert_eq!(back, v);
        }
    }

    fn arb_value(depth: u32) -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<u64>().prop_map(|n| Value::from(n)),
            "[a-z0-9 ]{0,12}".prop_map(Value::String),
        ];
        leaf.prop_recursive(depth, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }
}
