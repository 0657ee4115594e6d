//! Identity registry contract: binds addresses to stakeholder metadata.
//!
//! Records are immutable except for the service endpoint; deregistration is
//! not supported, so every address that ever authored a registry write stays
//! resolvable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::to_canonical_value;
use crate::crypto::Address;
use crate::error::{Error, ErrorCode, Result};
use crate::runtime::{ExecutionContext, MutationOutcome};
use crate::tx::{CallEnvelope, Event};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub address: Address,
    pub public_key: String,
    pub display_name: String,
    pub organisation: String,
    pub service_endpoint: String,
    pub registered_at_height: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityRegistryState {
    pub records: BTreeMap<Address, IdentityRecord>,
}

/// Wire shape for `register_identity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterIdentityArgs {
    pub address: Address,
    pub public_key: String,
    pub display_name: String,
    #[serde(default)]
    pub organisation: String,
    pub service_endpoint: String,
}

impl IdentityRegistryState {
    pub fn is_registered(&self, address: &Address) -> bool {
        self.records.contains_key(address)
    }

    pub fn resolve(&self, address: &Address) -> Result<&IdentityRecord> {
        self.records.get(address).ok_or_else(|| {
            Error::new(
                ErrorCode::NotRegistered,
                format!("no identity registered for {address}"),
            )
        })
    }

    /// Precondition helper used by registry writes: the acting address must
    /// resolve to an identity, otherwise accountability breaks.
    pub fn require_registered(&self, address: &Address, role: &str) -> Result<()> {
        if self.is_registered(address) {
            Ok(())
        } else {
            Err(Error::new(
                ErrorCode::NotRegistered,
                format!("{role} {address} has no registered identity"),
            ))
        }
    }
}

fn validate_endpoint(endpoint: &str) -> Result<()> {
    url::Url::parse(endpoint)
        .map_err(|e| Error::new(ErrorCode::BadUrl, format!("bad service endpoint: {e}")))?;
    Ok(())
}

pub fn apply(
    state: &mut IdentityRegistryState,
    ctx: &ExecutionContext,
    call: &CallEnvelope,
) -> Result<MutationOutcome> {
    match call.method.as_str() {
        "register_identity" => {
            let args: RegisterIdentityArgs = call.arg(0, "record")?;
            if args.address != ctx.sender {
                return Err(Error::new(
                    ErrorCode::AddressMismatch,
                    format!("record address {} but sender {}", args.address, ctx.sender),
                ));
            }
            let key_bytes = hex::decode(&args.public_key)
                .map_err(|e| Error::new(ErrorCode::KeyMismatch, format!("bad key hex: {e}")))?;
            if Address::from_public_key(&key_bytes) != args.address {
                return Err(Error::new(
                    ErrorCode::KeyMismatch,
                    "public key does not derive the record address",
                ));
            }
            if state.records.contains_key(&args.address) {
                return Err(Error::new(
                    ErrorCode::AlreadyRegistered,
                    format!("{} already registered", args.address),
                ));
            }
            validate_endpoint(&args.service_endpoint)?;
            let record = IdentityRecord {
                address: args.address,
                public_key: args.public_key,
                display_name: args.display_name,
                organisation: args.organisation,
                service_endpoint: args.service_endpoint,
                registered_at_height: ctx.block_height,
            };
            state.records.insert(args.address, record);
            Ok(MutationOutcome::with_events(vec![Event::new(
                "REGISTERED",
                &[("address", ctx.sender.to_hex())],
            )]))
        }
        "update_endpoint" => {
            let new_endpoint: String = call.arg(0, "new_endpoint")?;
            validate_endpoint(&new_endpoint)?;
            let record = state.records.get_mut(&ctx.sender).ok_or_else(|| {
                Error::new(
                    ErrorCode::NotRegistered,
                    format!("sender {} not registered", ctx.sender),
                )
            })?;
            let old = std::mem::replace(&mut record.service_endpoint, new_endpoint.clone());
            Ok(MutationOutcome::with_events(vec![Event::new(
                "ENDPOINT_UPDATED",
                &[
                    ("address", ctx.sender.to_hex()),
                    ("old_endpoint", old),
                    ("new_endpoint", new_endpoint),
                ],
            )]))
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("identity registry has no method {other}"),
        )),
    }
}

pub fn query(state: &IdentityRegistryState, call: &CallEnvelope) -> Result<Value> {
    match call.method.as_str() {
        "resolve_identity" => {
            let address: Address = call.arg(0, "address")?;
            to_canonical_value(state.resolve(&address)?)
        }
        "is_registered" => {
            let address: Address = call.arg(0, "address")?;
            Ok(Value::Bool(state.is_registered(&address)))
        }
        "list_identities" => {
            let records: Vec<&IdentityRecord> = state.records.values().collect();
            to_canonical_value(&records)
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("identity registry has no read method {other}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyPair;

    fn ctx(sender: Address) -> ExecutionContext {
        ExecutionContext {
            sender,
            tx_nonce: 0,
            block_height: 7,
            block_timestamp_ms: 1_000,
        }
    }

    fn register_args(pair: &KeyPair) -> RegisterIdentityArgs {
        RegisterIdentityArgs {
            address: pair.address(),
            public_key: hex::encode(pair.public_key_bytes()),
            display_name: "Alice".into(),
            organisation: "Acme Research".into(),
            service_endpoint: "https://alice.example/api".into(),
        }
    }

    fn register_call(pair: &KeyPair) -> CallEnvelope {
        CallEnvelope::new(
            "register_identity",
            vec![serde_json::to_value(register_args(pair)).unwrap()],
        )
    }

    #[test]
    fn register_then_resolve_roundtrips() {
        let pair = KeyPair::from_seed(b"alice");
        let mut state = IdentityRegistryState::default();
        apply(&mut state, &ctx(pair.address()), &register_call(&pair)).unwrap();

        let resolved = state.resolve(&pair.address()).unwrap();
        assert_eq!(resolved.display_name, "Alice");
        assert_eq!(resolved.registered_at_height, 7);
        assert_eq!(resolved.public_key, hex::encode(pair.public_key_bytes()));
    }

    #[test]
    fn double_registration_is_rejected() {
        let pair = KeyPair::from_seed(b"alice");
        let mut state = IdentityRegistryState::default();
        apply(&mut state, &ctx(pair.address()), &register_call(&pair)).unwrap();
        let err = apply(&mut state, &ctx(pair.address()), &register_call(&pair)).unwrap_err();
        assert_eq!(err.code, ErrorCode::AlreadyRegistered);
    }

    #[test]
    fn sender_must_match_record_address() {
        let pair = KeyPair::from_seed(b"alice");
        let other = KeyPair::from_seed(b"mallory");
        let mut state = IdentityRegistryState::default();
        let err = apply(&mut state, &ctx(other.address()), &register_call(&pair)).unwrap_err();
        assert_eq!(err.code, ErrorCode::AddressMismatch);
    }

    #[test]
    fn key_must_derive_address() {
        let pair = KeyPair::from_seed(b"alice");
        let mut args = register_args(&pair);
        args.public_key = hex::encode(KeyPair::from_seed(b"other").public_key_bytes());
        let call = CallEnvelope::new(
            "register_identity",
            vec![serde_json::to_value(args).unwrap()],
        );
        let mut state = IdentityRegistryState::default();
        let err = apply(&mut state, &ctx(pair.address()), &call).unwrap_err();
        assert_eq!(err.code, ErrorCode::KeyMismatch);
    }

    #[test]
    fn unregistered_endpoint_update_fails() {
        let pair = KeyPair::from_seed(b"alice");
        let mut state = IdentityRegistryState::default();
        let call = CallEnvelope::new(
            "update_endpoint",
            vec![serde_json::json!("https://new.example")],
        );
        let err = apply(&mut state, &ctx(pair.address()), &call).unwrap_err();
        assert_eq!(err.code, ErrorCode::NotRegistered);
    }

    #[test]
    fn endpoint_update_emits_event_history() {
        let pair = KeyPair::from_seed(b"alice");
        let mut state = IdentityRegistryState::default();
        apply(&mut state, &ctx(pair.address()), &register_call(&pair)).unwrap();

        let mut emitted = Vec::new();
        for endpoint in ["https://one.example", "https://two.example"] {
            let call = CallEnvelope::new("update_endpoint", vec![serde_json::json!(endpoint)]);
            let outcome = apply(&mut state, &ctx(pair.address()), &call).unwrap();
            emitted.extend(outcome.events);
        }

        // Latest value wins in state...
        assert_eq!(
            state.resolve(&pair.address()).unwrap().service_endpoint,
            "https://two.example"
        );
        // ...and the event log exposes both updates, oldest first.
        let history: Vec<(&str, &str)> = emitted
            .iter()
            .map(|e| {
                (
                    e.attributes["old_endpoint"].as_str(),
                    e.attributes["new_endpoint"].as_str(),
                )
            })
            .collect();
        assert_eq!(
            history,
            vec![
                ("https://alice.example/api", "https://one.example"),
                ("https://one.example", "https://two.example"),
            ]
        );
    }

    #[test]
    fn bad_url_is_rejected() {
        let pair = KeyPair::from_seed(b"alice");
        let mut args = register_args(&pair);
        args.service_endpoint = "not a url".into();
        let call = CallEnvelope::new(
            "register_identity",
            vec![serde_json::to_value(args).unwrap()],
        );
        let mut state = IdentityRegistryState::default();
        let err = apply(&mut state, &ctx(pair.address()), &call).unwrap_err();
        assert_eq!(err.code, ErrorCode::BadUrl);
    }

    #[test]
    fn unknown_method_is_rejected() {
        let mut state = IdentityRegistryState::default();
        let call = CallEnvelope::new("frobnicate", vec![]);
        let err = apply(&mut state, &ctx(Address::ZERO), &call).unwrap_err();
        assert_eq!(err.code, ErrorCode::NoSuchMethod);
    }
}
