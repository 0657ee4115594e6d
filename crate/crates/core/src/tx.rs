//! Transaction envelope, contract call encoding, receipts and events.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::canonical::{canonical_digest, canonical_json_bytes};
use crate::crypto::{verify_signature, Address, Hash32, KeyPair};
use crate::error::{Error, ErrorCode, Result};
use crate::runtime::ContractKind;

/// Transaction target: an existing contract, or the deploy sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxTarget {
    Deploy,
    Contract(Address),
}

impl Serialize for TxTarget {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TxTarget::Deploy => serializer.serialize_str("DEPLOY"),
            TxTarget::Contract(addr) => serializer.serialize_str(&addr.to_hex()),
        }
    }
}

impl<'de> Deserialize<'de> for TxTarget {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "DEPLOY" {
            Ok(TxTarget::Deploy)
        } else {
            Address::from_hex(&s)
                .map(TxTarget::Contract)
                .map_err(serde::de::Error::custom)
        }
    }
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        bytes: &[u8],
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        bytes: &[u8],
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// A signed, nonce-ordered state-change request.
///
/// The sender's public key travels with the transaction; validity requires
/// both that the key derives the claimed sender address and that the
/// signature verifies over the canonical signing bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub sender: Address,
    #[serde(with = "hex_bytes")]
    pub sender_public_key: Vec<u8>,
    pub nonce: u64,
    pub target: TxTarget,
    #[serde(with = "base64_bytes")]
    pub payload: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
}

/// The byte string a transaction signature commits to. Includes the chain id
/// so transactions cannot be replayed across chains.
#[derive(Serialize)]
struct SigningView<'a> {
    chain_id: &'a str,
    sender: Address,
    nonce: u64,
    target: TxTarget,
    #[serde(with = "base64_bytes")]
    payload: &'a [u8],
}

pub fn signing_bytes(
    chain_id: &str,
    sender: Address,
    nonce: u64,
    target: TxTarget,
    payload: &[u8],
) -> Result<Vec<u8>> {
    canonical_json_bytes(&SigningView {
        chain_id,
        sender,
        nonce,
        target,
        payload,
    })
}

impl SignedTransaction {
    pub fn create(
        keypair: &KeyPair,
        chain_id: &str,
        nonce: u64,
        target: TxTarget,
        payload: Vec<u8>,
    ) -> Result<SignedTransaction> {
        let sender = keypair.address();
        let message = signing_bytes(chain_id, sender, nonce, target, &payload)?;
        let signature = keypair.sign(&message);
        Ok(SignedTransaction {
            sender,
            sender_public_key: keypair.public_key_bytes().to_vec(),
            nonce,
            target,
            payload,
            signature,
        })
    }

    /// Checks address derivation and signature. Does not check the nonce;
    /// that needs chain state.
    pub fn verify(&self, chain_id: &str) -> Result<()> {
        if Address::from_public_key(&self.sender_public_key) != self.sender {
            return Err(Error::new(
                ErrorCode::BadSignature,
                "public key does not derive the sender address",
            ));
        }
        let message =
            signing_bytes(chain_id, self.sender, self.nonce, self.target, &self.payload)?;
        if !verify_signature(&self.sender_public_key, &message, &self.signature) {
            return Err(Error::new(
                ErrorCode::BadSignature,
                "signature verification failed",
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization of the whole transaction.
    pub fn hash(&self) -> Hash32 {
        canonical_digest(self).expect("transaction serializes canonically")
    }

    /// Serialized length, the unit the block byte budget is charged in.
    pub fn size_bytes(&self) -> usize {
        canonical_json_bytes(self)
            .expect("transaction serializes canonically")
            .len()
    }
}

/// An encoded contract call: method name plus an ordered argument list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallEnvelope {
    pub method: String,
    pub args: Vec<Value>,
}

impl CallEnvelope {
    pub fn new(method: impl Into<String>, args: Vec<Value>) -> CallEnvelope {
        CallEnvelope {
            method: method.into(),
            args,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        canonical_json_bytes(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<CallEnvelope> {
        serde_json::from_slice(bytes)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("malformed call envelope: {e}")))
    }

    /// Decodes the i-th argument into a concrete type.
    pub fn arg<T: serde::de::DeserializeOwned>(&self, index: usize, name: &str) -> Result<T> {
        let value = self.args.get(index).ok_or_else(|| {
            Error::new(
                ErrorCode::BadArgs,
                format!("missing argument {index} ({name})"),
            )
        })?;
        serde_json::from_value(value.clone()).map_err(|e| {
            Error::new(
                ErrorCode::BadArgs,
                format!("bad argument {index} ({name}): {e}"),
            )
        })
    }
}

/// Payload of a `TxTarget::Deploy` transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployEnvelope {
    pub kind: ContractKind,
    pub init_args: Value,
}

impl DeployEnvelope {
    pub fn encode(&self) -> Result<Vec<u8>> {
        canonical_json_bytes(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<DeployEnvelope> {
        serde_json::from_slice(bytes).map_err(|e| {
            Error::new(ErrorCode::BadArgs, format!("malformed deploy envelope: {e}"))
        })
    }
}

/// Contract-emitted event, stored on the receipt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub attributes: BTreeMap<String, String>,
}

impl Event {
    pub fn new(name: &str, attributes: &[(&str, String)]) -> Event {
        Event {
            name: name.to_string(),
            attributes: attributes
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReceiptStatus {
    Success,
    Reverted,
}

/// Outcome of one included transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: Hash32,
    pub block_height: u64,
    pub status: ReceiptStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revert_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
    pub emitted_events: Vec<Event>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tx() -> SignedTransaction {
        let pair = KeyPair::from_seed(b"tx-tests");
        let envelope = CallEnvelope::new("ping", vec![serde_json::json!(1)]);
        SignedTransaction::create(
            &pair,
            "test-chain",
            0,
            TxTarget::Contract(Address::ZERO),
            envelope.encode().unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn valid_transaction_verifies() {
        sample_tx().verify("test-chain").unwrap();
    }

    #[test]
    fn wrong_chain_id_fails_verification() {
        let tx = sample_tx();
        assert_eq!(
            tx.verify("other-chain").unwrap_err().code,
            ErrorCode::BadSignature
        );
    }

    #[test]
    fn tampered_payload_fails_verification() {
        let mut tx = sample_tx();
        tx.payload[0] ^= 0xff;
        assert_eq!(
            tx.verify("test-chain").unwrap_err().code,
            ErrorCode::BadSignature
        );
    }

    #[test]
    fn mismatched_public_key_fails() {
        let mut tx = sample_tx();
        tx.sender_public_key = KeyPair::from_seed(b"other").public_key_bytes().to_vec();
        assert_eq!(
            tx.verify("test-chain").unwrap_err().code,
            ErrorCode::BadSignature
        );
    }

    #[test]
    fn tx_hash_is_32_bytes_and_deterministic() {
        let tx = sample_tx();
        assert_eq!(tx.hash(), tx.hash());
        assert_eq!(tx.hash().as_bytes().len(), 32);
    }

    #[test]
    fn envelope_roundtrip() {
        let env = CallEnvelope::new(
            "create_dataset",
            vec![serde_json::json!("p1"), serde_json::json!({"k": [1, 2]})],
        );
        let decoded = CallEnvelope::decode(&env.encode().unwrap()).unwrap();
        assert_eq!(decoded, env);
    }

    #[test]
    fn size_bytes_matches_serialized_length() {
        let tx = sample_tx();
        assert_eq!(tx.size_bytes(), canonical_json_bytes(&tx).unwrap().len());
    }
}
