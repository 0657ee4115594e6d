//! Registry factory contract: template for customised DataBOM registries.
//!
//! The factory validates a schema configuration, asks the runtime to deploy
//! a fresh registry instance, and keeps a discoverable index of everything
//! it deployed. Customisation is data-driven: extra required metadata
//! fields, the licence allowlist and the operation vocabulary.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::to_canonical_value;
use crate::contracts::identity::IdentityRegistryState;
use crate::contracts::registry::op_kinds;
use crate::crypto::Address;
use crate::error::{Error, ErrorCode, Result};
use crate::runtime::{Effect, ExecutionContext, MutationOutcome};
use crate::tx::{CallEnvelope, Event};

/// Per-registry customisation knobs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaConfig {
    #[serde(default)]
    pub extra_required_fields: Vec<String>,
    #[serde(default = "default_licences")]
    pub licence_allowlist: Vec<String>,
    #[serde(default = "default_vocabulary")]
    pub operation_vocabulary: Vec<String>,
}

fn default_licences() -> Vec<String> {
    vec!["CC0".into(), "CC-BY".into(), "PROPRIETARY".into()]
}

fn default_vocabulary() -> Vec<String> {
    op_kinds::STANDARD.iter().map(|s| s.to_string()).collect()
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            extra_required_fields: Vec::new(),
            licence_allowlist: default_licences(),
            operation_vocabulary: default_vocabulary(),
        }
    }
}

impl SchemaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.licence_allowlist.is_empty() {
            return Err(Error::new(
                ErrorCode::BadSchema,
                "licence allowlist must not be empty",
            ));
        }
        if self.operation_vocabulary.is_empty() {
            return Err(Error::new(
                ErrorCode::BadSchema,
                "operation vocabulary must not be empty",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryDescriptor {
    pub registry_address: Address,
    pub project_id: String,
    pub owner: Address,
    pub schema_config: SchemaConfig,
    pub deployed_at_height: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactoryState {
    /// Descriptors in deployment order.
    pub registries: Vec<RegistryDescriptor>,
}

impl FactoryState {
    pub fn find(&self, project_id: &str) -> Option<&RegistryDescriptor> {
        self.registries.iter().find(|d| d.project_id == project_id)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeployRegistryArgs {
    pub project_id: String,
    #[serde(default)]
    pub project_name: String,
    #[serde(default)]
    pub initial_acl: Vec<Address>,
    #[serde(default)]
    pub schema_config: SchemaConfig,
}

pub fn apply(
    state: &mut FactoryState,
    identities: &IdentityRegistryState,
    ctx: &ExecutionContext,
    call: &CallEnvelope,
) -> Result<MutationOutcome> {
    match call.method.as_str() {
        "deploy_registry" => {
            let args: DeployRegistryArgs = call.arg(0, "deploy_registry")?;
            identities.require_registered(&ctx.sender, "deployer")?;
            if args.project_id.is_empty() {
                return Err(Error::new(ErrorCode::BadSchema, "project_id must not be empty"));
            }
            if state.find(&args.project_id).is_some() {
                return Err(Error::new(
                    ErrorCode::DuplicateProject,
                    format!("project {} already has a registry", args.project_id),
                ));
            }
            args.schema_config.validate()?;
            // The runtime performs the deployment and calls back into
            // `record_deployment` with the assigned address.
            Ok(MutationOutcome {
                events: vec![],
                effects: vec![Effect::DeployRegistry {
                    project_id: args.project_id,
                    project_name: args.project_name,
                    initial_acl: args.initial_acl,
                    schema_config: args.schema_config,
                    owner: ctx.sender,
                }],
            })
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("registry factory has no method {other}"),
        )),
    }
}

/// Runtime callback after a factory-initiated deployment succeeds; keeps the
/// index and the deployed set equal by construction.
pub fn record_deployment(state: &mut FactoryState, descriptor: RegistryDescriptor) -> Event {
    let event = Event::new(
        "REGISTRY_DEPLOYED",
        &[
            ("project_id", descriptor.project_id.clone()),
            ("registry_address", descriptor.registry_address.to_hex()),
            ("owner", descriptor.owner.to_hex()),
        ],
    );
    state.registries.push(descriptor);
    event
}

pub fn query(state: &FactoryState, call: &CallEnvelope) -> Result<Value> {
    match call.method.as_str() {
        "list_registries" => {
            let owner: Option<Address> = call.arg(0, "owner").unwrap_or(None);
            let matching: Vec<&RegistryDescriptor> = state
                .registries
                .iter()
                .filter(|d| owner.map_or(true, |o| d.owner == o))
                .collect();
            to_canonical_value(&matching)
        }
        "get_registry" => {
            let project_id: String = call.arg(0, "project_id")?;
            let descriptor = state.find(&project_id).ok_or_else(|| {
                Error::new(
                    ErrorCode::NoSuchContract,
                    format!("no registry for project {project_id}"),
                )
            })?;
            to_canonical_value(descriptor)
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("registry factory has no read method {other}"),
        )),
    }
}
