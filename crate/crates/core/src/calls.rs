//! Typed builders for contract call envelopes.
//!
//! Argument order is part of the wire format; building envelopes here keeps
//! every client (gateway, generator, benchmarks, tests) in agreement.

use serde_json::json;

use crate::contracts::factory::DeployRegistryArgs;
use crate::contracts::identity::RegisterIdentityArgs;
use crate::contracts::registry::{CatalogueFilter, DependencyRef, PolicyInput, VersionInput};
use crate::crypto::Address;
use crate::error::Result;
use crate::tx::CallEnvelope;

pub fn register_identity(args: &RegisterIdentityArgs) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "register_identity",
        vec![serde_json::to_value(args)
            .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?],
    ))
}

pub fn update_endpoint(new_endpoint: &str) -> CallEnvelope {
    CallEnvelope::new("update_endpoint", vec![json!(new_endpoint)])
}

pub fn resolve_identity(address: Address) -> CallEnvelope {
    CallEnvelope::new("resolve_identity", vec![json!(address)])
}

pub fn is_registered(address: Address) -> CallEnvelope {
    CallEnvelope::new("is_registered", vec![json!(address)])
}

pub fn list_identities() -> CallEnvelope {
    CallEnvelope::new("list_identities", vec![])
}

pub fn deploy_registry(args: &DeployRegistryArgs) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "deploy_registry",
        vec![serde_json::to_value(args)
            .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?],
    ))
}

pub fn list_registries(owner: Option<Address>) -> CallEnvelope {
    CallEnvelope::new("list_registries", vec![json!(owner)])
}

pub fn get_registry(project_id: &str) -> CallEnvelope {
    CallEnvelope::new("get_registry", vec![json!(project_id)])
}

pub fn create_project(project_id: &str, name: &str, initial_acl: &[Address]) -> CallEnvelope {
    CallEnvelope::new(
        "create_project",
        vec![json!(project_id), json!(name), json!(initial_acl)],
    )
}

pub fn grant_project_access(grantee: Address) -> CallEnvelope {
    CallEnvelope::new("grant_project_access", vec![json!(grantee)])
}

pub fn revoke_project_access(grantee: Address) -> CallEnvelope {
    CallEnvelope::new("revoke_project_access", vec![json!(grantee)])
}

pub fn grant_dataset_access(uuid: &str, grantee: Address) -> CallEnvelope {
    CallEnvelope::new("grant_dataset_access", vec![json!(uuid), json!(grantee)])
}

pub fn revoke_dataset_access(uuid: &str, grantee: Address) -> CallEnvelope {
    CallEnvelope::new("revoke_dataset_access", vec![json!(uuid), json!(grantee)])
}

pub fn create_dataset(
    project_id: &str,
    year: u16,
    uuid: &str,
    file_name: &str,
    version: &VersionInput,
) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "create_dataset",
        vec![
            json!(project_id),
            json!(year),
            json!(uuid),
            json!(file_name),
            serde_json::to_value(version)
                .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
        ],
    ))
}

pub fn add_version(uuid: &str, version: &VersionInput) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "add_version",
        vec![
            json!(uuid),
            serde_json::to_value(version)
                .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
        ],
    ))
}

pub fn register_merge(
    project_id: &str,
    year: u16,
    new_uuid: &str,
    file_name: &str,
    parents: &[DependencyRef],
    version: &VersionInput,
) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "register_merge",
        vec![
            json!(project_id),
            json!(year),
            json!(new_uuid),
            json!(file_name),
            serde_json::to_value(parents)
                .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
            serde_json::to_value(version)
                .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
        ],
    ))
}

pub fn set_disclosure_policy(
    scope: &str,
    policy: &PolicyInput,
    uuid: Option<&str>,
) -> Result<CallEnvelope> {
    let mut args = vec![
        json!(scope),
        serde_json::to_value(policy)
            .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
    ];
    if let Some(uuid) = uuid {
        args.push(json!(uuid));
    }
    Ok(CallEnvelope::new("set_disclosure_policy", args))
}

pub fn get_version(uuid: &str, version_number: u32, reader: Address) -> CallEnvelope {
    CallEnvelope::new(
        "get_version",
        vec![json!(uuid), json!(version_number), json!(reader)],
    )
}

pub fn latest_version(uuid: &str) -> CallEnvelope {
    CallEnvelope::new("latest_version", vec![json!(uuid)])
}

pub fn has_dataset(uuid: &str) -> CallEnvelope {
    CallEnvelope::new("has_dataset", vec![json!(uuid)])
}

pub fn list_catalogue(filter: &CatalogueFilter, reader: Address) -> Result<CallEnvelope> {
    Ok(CallEnvelope::new(
        "list_catalogue",
        vec![
            serde_json::to_value(filter)
                .map_err(|e| crate::Error::new(crate::ErrorCode::BadArgs, e.to_string()))?,
            json!(reader),
        ],
    ))
}

pub fn get_project() -> CallEnvelope {
    CallEnvelope::new("get_project", vec![])
}

pub fn export_records() -> CallEnvelope {
    CallEnvelope::new("export_records", vec![])
}
