//! Contract runtime: hosts contract instances as deterministic state
//! machines keyed by address and routes calls to their handlers.
//!
//! Contract code is native Rust, not interpreted bytecode. Mutating dispatch
//! runs the handler against a clone of the target's state and commits only on
//! success, so a revert leaves the canonical state bytes untouched. The
//! identity registry is exposed to handlers as a read-only view for
//! accountability preconditions; the factory's deployments come back to the
//! runtime as effects so the index and the deployed set stay equal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{canonical_digest, canonical_json_bytes};
use crate::contracts::factory::{self, FactoryState, RegistryDescriptor, SchemaConfig};
use crate::contracts::identity::{self, IdentityRegistryState};
use crate::contracts::registry::{self, DatabomRegistryState};
use crate::crypto::{sha256, Address, Hash32};
use crate::error::{Error, ErrorCode, Result};
use crate::tx::{CallEnvelope, Event};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractKind {
    #[serde(rename = "IDENTITY_REGISTRY")]
    IdentityRegistry,
    #[serde(rename = "REGISTRY_FACTORY")]
    RegistryFactory,
    #[serde(rename = "DATABOM_REGISTRY")]
    DatabomRegistry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum ContractState {
    #[serde(rename = "IDENTITY_REGISTRY")]
    Identity(IdentityRegistryState),
    #[serde(rename = "REGISTRY_FACTORY")]
    Factory(FactoryState),
    #[serde(rename = "DATABOM_REGISTRY")]
    Registry(DatabomRegistryState),
}

impl ContractState {
    pub fn kind(&self) -> ContractKind {
        match self {
            ContractState::Identity(_) => ContractKind::IdentityRegistry,
            ContractState::Factory(_) => ContractKind::RegistryFactory,
            ContractState::Registry(_) => ContractKind::DatabomRegistry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractInstance {
    pub address: Address,
    pub kind: ContractKind,
    pub creator: Address,
    pub created_at_height: u64,
    pub state: ContractState,
}

/// Call context handed to handlers.
#[derive(Debug, Clone, Copy)]
pub struct ExecutionContext {
    pub sender: Address,
    pub tx_nonce: u64,
    pub block_height: u64,
    pub block_timestamp_ms: u64,
}

/// Side effects a handler may request; executed by the runtime inside the
/// same transaction.
#[derive(Debug, Clone)]
pub enum Effect {
    DeployRegistry {
        project_id: String,
        project_name: String,
        initial_acl: Vec<Address>,
        schema_config: SchemaConfig,
        owner: Address,
    },
}

/// Result of a successful mutating handler.
#[derive(Debug, Clone, Default)]
pub struct MutationOutcome {
    pub events: Vec<Event>,
    pub effects: Vec<Effect>,
}

impl MutationOutcome {
    pub fn with_events(events: Vec<Event>) -> MutationOutcome {
        MutationOutcome {
            events,
            effects: vec![],
        }
    }
}

/// Deterministic contract address: SHA-256 tail-20 of (creator, nonce, kind).
pub fn derive_contract_address(creator: Address, nonce: u64, kind: ContractKind) -> Address {
    #[derive(Serialize)]
    struct Material {
        creator: Address,
        nonce: u64,
        kind: ContractKind,
    }
    let bytes = canonical_json_bytes(&Material {
        creator,
        nonce,
        kind,
    })
    .expect("address material serializes");
    let digest = sha256(&bytes);
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest[12..32]);
    Address::from_bytes(out)
}

/// Well-known genesis addresses.
pub fn identity_registry_address() -> Address {
    derive_contract_address(Address::ZERO, 0, ContractKind::IdentityRegistry)
}

pub fn registry_factory_address() -> Address {
    derive_contract_address(Address::ZERO, 1, ContractKind::RegistryFactory)
}

/// All contract instances at one height.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Contracts {
    pub instances: BTreeMap<Address, ContractInstance>,
}

impl Contracts {
    /// Genesis deploys the identity registry and the registry factory at
    /// well-known addresses.
    pub fn genesis() -> Contracts {
        let mut contracts = Contracts::default();
        contracts.instances.insert(
            identity_registry_address(),
            ContractInstance {
                address: identity_registry_address(),
                kind: ContractKind::IdentityRegistry,
                creator: Address::ZERO,
                created_at_height: 0,
                state: ContractState::Identity(IdentityRegistryState::default()),
            },
        );
        contracts.instances.insert(
            registry_factory_address(),
            ContractInstance {
                address: registry_factory_address(),
                kind: ContractKind::RegistryFactory,
                creator: Address::ZERO,
                created_at_height: 0,
                state: ContractState::Factory(FactoryState::default()),
            },
        );
        contracts
    }

    pub fn get(&self, address: &Address) -> Result<&ContractInstance> {
        self.instances.get(address).ok_or_else(|| {
            Error::new(
                ErrorCode::NoSuchContract,
                format!("no contract at {address}"),
            )
        })
    }

    pub fn identity_state(&self) -> &IdentityRegistryState {
        match &self
            .instances
            .get(&identity_registry_address())
            .expect("genesis deploys the identity registry")
            .state
        {
            ContractState::Identity(state) => state,
            _ => unreachable!("identity registry address holds identity state"),
        }
    }

    pub fn factory_state(&self) -> &FactoryState {
        match &self
            .instances
            .get(&registry_factory_address())
            .expect("genesis deploys the registry factory")
            .state
        {
            ContractState::Factory(state) => state,
            _ => unreachable!("factory address holds factory state"),
        }
    }

    pub fn registry_state(&self, address: &Address) -> Result<&DatabomRegistryState> {
        match &self.get(address)?.state {
            ContractState::Registry(state) => Ok(state),
            _ => Err(Error::new(
                ErrorCode::BadArgs,
                format!("contract at {address} is not a databom registry"),
            )),
        }
    }

    /// Digest of the canonical serialization of all contract state.
    pub fn state_root(&self) -> Hash32 {
        canonical_digest(&self.instances).expect("contract state serializes canonically")
    }

    /// Runs a mutating call. On success the new state and any deployment
    /// effects are committed; on revert nothing changes.
    pub fn dispatch_mutating(
        &mut self,
        target: Address,
        call: &CallEnvelope,
        ctx: &ExecutionContext,
    ) -> Result<Vec<Event>> {
        let instance = self.get(&target)?;
        // Work on a clone of the target state; commit only on success.
        let mut working = instance.state.clone();
        let outcome = match &mut working {
            ContractState::Identity(state) => identity::apply(state, ctx, call)?,
            ContractState::Factory(state) => {
                factory::apply(state, self.identity_state(), ctx, call)?
            }
            ContractState::Registry(state) => {
                registry::apply(state, self.identity_state(), ctx, call)?
            }
        };
        let mut events = outcome.events;
        // Execute effects before committing; a failing effect reverts the
        // whole call.
        let mut deployments: Vec<(ContractInstance, RegistryDescriptor)> = Vec::new();
        for effect in &outcome.effects {
            match effect {
                Effect::DeployRegistry {
                    project_id,
                    project_name,
                    initial_acl,
                    schema_config,
                    owner,
                } => {
                    let address = derive_contract_address(
                        *owner,
                        ctx.tx_nonce,
                        ContractKind::DatabomRegistry,
                    );
                    if self.instances.contains_key(&address) {
                        return Err(Error::new(
                            ErrorCode::BadInitArgs,
                            format!("address collision deploying registry at {address}"),
                        ));
                    }
                    let mut state = DatabomRegistryState::new(schema_config.clone());
                    state.init_project(
                        project_id,
                        project_name,
                        *owner,
                        initial_acl,
                        ctx.block_height,
                    )?;
                    deployments.push((
                        ContractInstance {
                            address,
                            kind: ContractKind::DatabomRegistry,
                            creator: *owner,
                            created_at_height: ctx.block_height,
                            state: ContractState::Registry(state),
                        },
                        RegistryDescriptor {
                            registry_address: address,
                            project_id: project_id.clone(),
                            owner: *owner,
                            schema_config: schema_config.clone(),
                            deployed_at_height: ctx.block_height,
                        },
                    ));
                }
            }
        }
        for (instance, descriptor) in deployments {
            match &mut working {
                ContractState::Factory(state) => {
                    events.push(factory::record_deployment(state, descriptor));
                }
                _ => {
                    return Err(Error::new(
                        ErrorCode::BadInitArgs,
                        "only the factory may deploy registries",
                    ))
                }
            }
            self.instances.insert(instance.address, instance);
        }
        self.instances
            .get_mut(&target)
            .expect("target existed above")
            .state = working;
        Ok(events)
    }

    /// Runs a read-only call against committed state. Never mutates.
    pub fn dispatch_readonly(
        &self,
        target: Address,
        call: &CallEnvelope,
        height: u64,
    ) -> Result<Value> {
        let instance = self.get(&target)?;
        match &instance.state {
            ContractState::Identity(state) => identity::query(state, call),
            ContractState::Factory(state) => factory::query(state, call),
            ContractState::Registry(state) => registry::query(state, call, height),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyPair;

    fn ctx(sender: Address, nonce: u64) -> ExecutionContext {
        ExecutionContext {
            sender,
            tx_nonce: nonce,
            block_height: 1,
            block_timestamp_ms: 500,
        }
    }

    fn register(contracts: &mut Contracts, pair: &KeyPair, nonce: u64) {
        let args = serde_json::json!({
            "address": pair.address(),
            "public_key": hex::encode(pair.public_key_bytes()),
            "display_name": "someone",
            "organisation": "org",
            "service_endpoint": "https://example.org",
        });
        contracts
            .dispatch_mutating(
                identity_registry_address(),
                &CallEnvelope::new("register_identity", vec![args]),
                &ctx(pair.address(), nonce),
            )
            .unwrap();
    }

    #[test]
    fn genesis_deploys_wellknown_contracts() {
        let contracts = Contracts::genesis();
        assert_eq!(contracts.instances.len(), 2);
        assert!(contracts.get(&identity_registry_address()).is_ok());
        assert!(contracts.get(&registry_factory_address()).is_ok());
    }

    #[test]
    fn address_derivation_is_deterministic() {
        let creator = KeyPair::from_seed(b"creator").address();
        let a1 = derive_contract_address(creator, 1, ContractKind::DatabomRegistry);
        let a2 = derive_contract_address(creator, 1, ContractKind::DatabomRegistry);
        assert_eq!(a1, a2);
    }

    #[test]
    fn distinct_nonces_give_distinct_addresses() {
        let creator = KeyPair::from_seed(b"creator").address();
        let a1 = derive_contract_address(creator, 1, ContractKind::DatabomRegistry);
        let a2 = derive_contract_address(creator, 2, ContractKind::DatabomRegistry);
        assert_ne!(a1, a2);

        // Oracle: recompute the derivation by hand.
        let material = serde_json::json!({
            "creator": creator,
            "kind": "DATABOM_REGISTRY",
            "nonce": 1u64,
        });
        let digest = sha256(&serde_json::to_vec(&material).unwrap());
        assert_eq!(a1.as_bytes(), &digest[12..32]);
    }

    #[test]
    fn unknown_method_reverts_without_state_change() {
        let mut contracts = Contracts::genesis();
        let before = contracts.state_root();
        let err = contracts
            .dispatch_mutating(
                identity_registry_address(),
                &CallEnvelope::new("frobnicate", vec![]),
                &ctx(Address::ZERO, 0),
            )
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::NoSuchMethod);
        assert_eq!(contracts.state_root(), before);
    }

    #[test]
    fn revert_midway_leaves_state_unchanged() {
        let mut contracts = Contracts::genesis();
        let alice = KeyPair::from_seed(b"alice");
        register(&mut contracts, &alice, 0);
        let before = contracts.state_root();

        // Re-registration fails after the handler has already parsed args.
        let args = serde_json::json!({
            "address": alice.address(),
            "public_key": hex::encode(alice.public_key_bytes()),
            "display_name": "dup",
            "organisation": "org",
            "service_endpoint": "https://example.org",
        });
        let err = contracts
            .dispatch_mutating(
                identity_registry_address(),
                &CallEnvelope::new("register_identity", vec![args]),
                &ctx(alice.address(), 1),
            )
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::AlreadyRegistered);
        assert_eq!(contracts.state_root(), before);
    }

    #[test]
    fn interleaved_reverts_equal_filtered_application() {
        // Oracle: applying only the valid calls must give the same state
        // root as applying the interleaved valid/reverting sequence.
        let alice = KeyPair::from_seed(b"alice");
        let bob = KeyPair::from_seed(b"bob");

        let build = |include_invalid: bool| {
            let mut contracts = Contracts::genesis();
            register(&mut contracts, &alice, 0);
            if include_invalid {
                // invalid: bob claims alice's address
                let args = serde_json::json!({
                    "address": alice.address(),
                    "public_key": hex::encode(bob.public_key_bytes()),
                    "display_name": "x",
                    "organisation": "org",
                    "service_endpoint": "https://example.org",
                });
                let _ = contracts.dispatch_mutating(
                    identity_registry_address(),
                    &CallEnvelope::new("register_identity", vec![args]),
                    &ctx(bob.address(), 0),
                );
            }
            register(&mut contracts, &bob, if include_invalid { 1 } else { 0 });
            contracts.state_root()
        };

        assert_eq!(build(true), build(false));
    }

    #[test]
    fn factory_deploy_roundtrip() {
        let mut contracts = Contracts::genesis();
        let alice = KeyPair::from_seed(b"alice");
        register(&mut contracts, &alice, 0);

        let events = contracts
            .dispatch_mutating(
                registry_factory_address(),
                &CallEnvelope::new(
                    "deploy_registry",
                    vec![serde_json::json!({
                        "project_id": "proj-1",
                        "project_name": "Project One",
                    })],
                ),
                &ctx(alice.address(), 1),
            )
            .unwrap();
        let deployed = events
            .iter()
            .find(|e| e.name == "REGISTRY_DEPLOYED")
            .unwrap();
        let address = Address::from_hex(&deployed.attributes["registry_address"]).unwrap();

        // Expected address oracle: (creator, nonce, kind).
        assert_eq!(
            address,
            derive_contract_address(alice.address(), 1, ContractKind::DatabomRegistry)
        );
        // The deployed registry answers reads.
        let project = contracts
            .dispatch_readonly(address, &CallEnvelope::new("get_project", vec![]), 1)
            .unwrap();
        assert_eq!(project["project_id"], "proj-1");
        assert_eq!(project["owner"], serde_json::json!(alice.address()));
        // Factory index matches the deployed set.
        assert_eq!(contracts.factory_state().registries.len(), 1);
    }

    #[test]
    fn duplicate_project_deploy_is_rejected() {
        let mut contracts = Contracts::genesis();
        let alice = KeyPair::from_seed(b"alice");
        register(&mut contracts, &alice, 0);
        let deploy = |contracts: &mut Contracts, nonce| {
            contracts.dispatch_mutating(
                registry_factory_address(),
                &CallEnvelope::new(
                    "deploy_registry",
                    vec![serde_json::json!({"project_id": "proj-1"})],
                ),
                &ctx(alice.address(), nonce),
            )
        };
        deploy(&mut contracts, 1).unwrap();
        assert_eq!(
            deploy(&mut contracts, 2).unwrap_err().code,
            ErrorCode::DuplicateProject
        );
    }

    #[test]
    fn readonly_on_missing_contract_fails() {
        let contracts = Contracts::genesis();
        let err = contracts
            .dispatch_readonly(
                Address::from_bytes([9u8; 20]),
                &CallEnvelope::new("get_project", vec![]),
                0,
            )
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::NoSuchContract);
    }
}
