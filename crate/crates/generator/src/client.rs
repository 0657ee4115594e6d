//! HTTP client for the DataBOM gateway, plus the wire DTOs the gateway
//! serves. Responses use the `{ok, result | error{code, message}}` envelope;
//! coded errors pass through unchanged so callers can match on them.

use std::path::Path;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use databom_core::contracts::factory::{RegistryDescriptor, SchemaConfig};
use databom_core::contracts::identity::IdentityRecord;
use databom_core::contracts::registry::{
    CatalogueRow, DependencyRef, PolicyInput, VersionInput, VersionView,
};
use databom_core::crypto::KeyFile;
use databom_core::error::{Error, ErrorCode, Result};
use databom_core::tx::Receipt;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthInfo {
    pub ok: bool,
    pub height: u64,
    pub state_root: String,
    pub chain_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterIdentityRequest {
    pub display_name: String,
    #[serde(default)]
    pub organisation: String,
    pub service_endpoint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateEndpointRequest {
    pub service_endpoint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeployRegistryRequest {
    pub project_id: String,
    #[serde(default)]
    pub project_name: String,
    #[serde(default)]
    pub initial_acl: Vec<String>,
    #[serde(default)]
    pub schema_config: Option<SchemaConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateDatasetRequest {
    pub project_id: String,
    pub year: u16,
    pub uuid: String,
    pub file_name: String,
    pub version: VersionInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddVersionRequest {
    pub version: VersionInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeRequest {
    pub project_id: String,
    pub year: u16,
    pub new_uuid: String,
    pub file_name: String,
    pub parents: Vec<DependencyRef>,
    pub version: VersionInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrantRequest {
    /// "project" or "dataset"
    pub scope: String,
    #[serde(default)]
    pub uuid: Option<String>,
    pub grantee: String,
    /// "grant" or "revoke"
    pub action: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisclosureRequest {
    pub scope: String,
    pub project_id: String,
    #[serde(default)]
    pub uuid: Option<String>,
    pub policy: PolicyInput,
}

/// Result of a mutating call: the transaction hash, the receipt when the
/// caller awaited inclusion, and call-specific extras.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TxOutcome {
    pub tx_hash: String,
    #[serde(default)]
    pub receipt: Option<Receipt>,
    #[serde(default)]
    pub registry_address: Option<String>,
    #[serde(default)]
    pub uuid: Option<String>,
    #[serde(default)]
    pub version: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatestVersionInfo {
    pub uuid: String,
    pub version_number: u32,
    pub content_hash: String,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    code: String,
    message: String,
}

#[derive(Debug, Deserialize)]
struct ResponseEnvelope {
    ok: bool,
    #[serde(default)]
    result: Option<Value>,
    #[serde(default)]
    error: Option<ErrorBody>,
}

/// Blocking gateway client. The caller name selects the signing key on the
/// gateway side; mutating calls default to awaiting inclusion.
#[derive(Clone)]
pub struct GatewayClient {
    base_url: String,
    caller: Option<String>,
    agent: ureq::Agent,
}

impl GatewayClient {
    pub fn new(base_url: impl Into<String>) -> GatewayClient {
        GatewayClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            caller: None,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
        }
    }

    /// Reads the caller name from a key file (the gateway holds the same key
    /// under that name in its key directory).
    pub fn with_key_file(base_url: impl Into<String>, key_file: &Path) -> Result<GatewayClient> {
        let key = KeyFile::load(key_file)?;
        Ok(GatewayClient::new(base_url).as_caller(&key.name))
    }

    pub fn as_caller(mut self, caller: &str) -> GatewayClient {
        self.caller = Some(caller.to_string());
        self
    }

    pub fn caller(&self) -> Option<&str> {
        self.caller.as_deref()
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn request(&self, method: &str, path: &str) -> ureq::Request {
        let mut req = self.agent.request(method, &format!("{}{}", self.base_url, path));
        if let Some(caller) = &self.caller {
            req = req.set("x-databom-caller", caller);
        }
        req
    }

    fn handle<T: DeserializeOwned>(
        &self,
        outcome: std::result::Result<ureq::Response, ureq::Error>,
    ) -> Result<T> {
        let response = match outcome {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => {
                return Err(Error::new(
                    ErrorCode::RegistryUnreachable,
                    format!("gateway unreachable: {t}"),
                ))
            }
        };
        let envelope: ResponseEnvelope = response.into_json().map_err(|e| {
            Error::new(
                ErrorCode::RegistryUnreachable,
                format!("bad gateway response: {e}"),
            )
        })?;
        if envelope.ok {
            let result = envelope.result.unwrap_or(Value::Null);
            serde_json::from_value(result).map_err(|e| {
                Error::new(
                    ErrorCode::BadArgs,
                    format!("unexpected result shape: {e}"),
                )
            })
        } else {
            let body = envelope.error.ok_or_else(|| {
                Error::new(ErrorCode::RegistryUnreachable, "error response without body")
            })?;
            let code = ErrorCode::parse(&body.code).unwrap_or(ErrorCode::RegistryUnreachable);
            Err(Error::new(code, body.message))
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.handle(self.request("GET", path).call())
    }

    fn send<T: DeserializeOwned>(
        &self,
        method: &str,
        path: &str,
        body: &impl Serialize,
        wait: bool,
    ) -> Result<T> {
        let path = if wait {
            format!("{path}?wait=true")
        } else {
            path.to_string()
        };
        self.handle(self.request(method, &path).send_json(
            serde_json::to_value(body)
                .map_err(|e| Error::new(ErrorCode::BadArgs, e.to_string()))?,
        ))
    }

    pub fn health(&self) -> Result<HealthInfo> {
        self.get("/health")
    }

    pub fn register_identity(&self, req: &RegisterIdentityRequest) -> Result<TxOutcome> {
        self.send("POST", "/identities", req, true)
    }

    pub fn get_identity(&self, address: &str) -> Result<IdentityRecord> {
        self.get(&format!("/identities/{address}"))
    }

    pub fn update_endpoint(&self, address: &str, endpoint: &str) -> Result<TxOutcome> {
        self.send(
            "PUT",
            &format!("/identities/{address}/endpoint"),
            &UpdateEndpointRequest {
                service_endpoint: endpoint.to_string(),
            },
            true,
        )
    }

    pub fn deploy_registry(&self, req: &DeployRegistryRequest) -> Result<TxOutcome> {
        self.send("POST", "/registries", req, true)
    }

    pub fn list_registries(&self, owner: Option<&str>) -> Result<Vec<RegistryDescriptor>> {
        let path = match owner {
            Some(owner) => format!("/registries?owner={owner}"),
            None => "/registries".to_string(),
        };
        self.get(&path)
    }

    pub fn grant(&self, project_id: &str, req: &GrantRequest) -> Result<TxOutcome> {
        self.send("POST", &format!("/registries/{project_id}/grants"), req, true)
    }

    pub fn create_dataset(&self, req: &CreateDatasetRequest) -> Result<TxOutcome> {
        self.send("POST", "/datasets", req, true)
    }

    pub fn add_version(&self, uuid: &str, version: VersionInput) -> Result<TxOutcome> {
        self.send(
            "POST",
            &format!("/datasets/{uuid}/versions"),
            &AddVersionRequest { version },
            true,
        )
    }

    pub fn merge(&self, req: &MergeRequest) -> Result<TxOutcome> {
        self.send("POST", "/datasets/merge", req, true)
    }

    pub fn latest_version(&self, uuid: &str) -> Result<LatestVersionInfo> {
        self.get(&format!("/datasets/{uuid}/latest"))
    }

    pub fn get_version(&self, uuid: &str, number: u32, reader: Option<&str>) -> Result<VersionView> {
        let path = match reader {
            Some(reader) => format!("/datasets/{uuid}/versions/{number}?reader={reader}"),
            None => format!("/datasets/{uuid}/versions/{number}"),
        };
        self.get(&path)
    }

    pub fn list_datasets(&self, query: &str) -> Result<Vec<CatalogueRow>> {
        let path = if query.is_empty() {
            "/datasets".to_string()
        } else {
            format!("/datasets?{query}")
        };
        self.get(&path)
    }

    pub fn set_disclosure(&self, req: &DisclosureRequest) -> Result<TxOutcome> {
        self.send("PUT", "/disclosure", req, true)
    }

    pub fn lineage(&self, uuid: &str, version: u32, query: &str) -> Result<Value> {
        self.get(&format!("/lineage/{uuid}/{version}/{query}"))
    }
}
