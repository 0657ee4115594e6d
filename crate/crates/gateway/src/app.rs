//! Routes, handlers and the error-to-status mapping.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use databom_core::calls;
use databom_core::contracts::factory::{DeployRegistryArgs, RegistryDescriptor, SchemaConfig};
use databom_core::contracts::identity::RegisterIdentityArgs;
use databom_core::contracts::registry::{CatalogueFilter, CatalogueRow};
use databom_core::crypto::{Address, Hash32, KeyPair};
use databom_core::error::{Error, ErrorCode, Result};
use databom_core::lineage::{LicenceMatrix, LineageEngine};
use databom_core::runtime::{identity_registry_address, registry_factory_address};
use databom_core::tx::{CallEnvelope, Event, Receipt, ReceiptStatus, SignedTransaction, TxTarget};
use databom_core::Node;
use databom_generator::client::{
    CreateDatasetRequest, DeployRegistryRequest, DisclosureRequest, GrantRequest, MergeRequest,
    RegisterIdentityRequest, UpdateEndpointRequest,
};

use crate::keys::KeyStore;

const RECEIPT_WAIT: Duration = Duration::from_secs(30);

#[derive(Clone)]
pub struct AppState {
    pub node: Arc<Node>,
    pub keys: Arc<KeyStore>,
    pub lineage: Arc<LineageEngine>,
    pub matrix: Arc<LicenceMatrix>,
    pub listen_addr: SocketAddr,
    /// Serializes mutating submissions per sender to keep nonces ordered.
    sender_locks: Arc<Mutex<HashMap<Address, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    pub fn new(
        node: Arc<Node>,
        keys: Arc<KeyStore>,
        matrix: LicenceMatrix,
        listen_addr: SocketAddr,
    ) -> AppState {
        AppState {
            lineage: Arc::new(LineageEngine::new(Arc::clone(&node))),
            node,
            keys,
            matrix: Arc::new(matrix),
            listen_addr,
            sender_locks: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    fn sender_lock(&self, sender: Address) -> Arc<tokio::sync::Mutex<()>> {
        Arc::clone(
            self.sender_locks
                .lock()
                .entry(sender)
                .or_insert_with(|| Arc::new(tokio::sync::Mutex::new(()))),
        )
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        ApiError(e)
    }
}

fn status_for(code: ErrorCode) -> StatusCode {
    use ErrorCode::*;
    match code {
        NoSuchContract | NoSuchDataset | NoSuchVersion | NoSuchMethod | NotRegistered => {
            StatusCode::NOT_FOUND
        }
        NotAuthorised | NotOwner | ImmutableOwner | AddressMismatch | KeyMismatch => {
            StatusCode::FORBIDDEN
        }
        DuplicateProject | DuplicateUuid | AlreadyRegistered | UnchangedContent => {
            StatusCode::CONFLICT
        }
        CorruptLog | UnresolvedActor | Io => StatusCode::INTERNAL_SERVER_ERROR,
        RegistryUnreachable => StatusCode::SERVICE_UNAVAILABLE,
        Timeout => StatusCode::GATEWAY_TIMEOUT,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(self.0.code);
        let body = json!({
            "ok": false,
            "error": {"code": self.0.code, "message": self.0.message},
        });
        (status, Json(body)).into_response()
    }
}

type ApiResult = std::result::Result<Json<Value>, ApiError>;

fn ok(result: Value) -> ApiResult {
    Ok(Json(json!({"ok": true, "result": result})))
}

#[derive(Debug, Default, Deserialize)]
struct MutQuery {
    wait: Option<bool>,
}

impl MutQuery {
    fn wait(&self) -> bool {
        self.wait.unwrap_or(true)
    }
}

fn caller_key(state: &AppState, headers: &HeaderMap) -> Result<(Address, KeyPair)> {
    let name = headers
        .get("x-databom-caller")
        .and_then(|v| v.to_str().ok())
        .ok_or_else(|| {
            Error::new(
                ErrorCode::KeyMismatch,
                "mutating requests need an x-databom-caller header naming a gateway key",
            )
        })?;
    state.keys.resolve(name)
}

fn reader_address(state: &AppState, headers: &HeaderMap, reader: Option<&str>) -> Address {
    if let Some(r) = reader {
        if let Ok(addr) = Address::from_hex(r) {
            return addr;
        }
    }
    headers
        .get("x-databom-caller")
        .and_then(|v| v.to_str().ok())
        .and_then(|name| state.keys.resolve(name).ok())
        .map(|(addr, _)| addr)
        .unwrap_or(Address::ZERO)
}

/// Signs, submits and (optionally) awaits a transaction. Reverted receipts
/// surface as their module error so HTTP statuses stay 1:1 with codes.
async fn submit(
    state: &AppState,
    key: &KeyPair,
    target: Address,
    envelope: &CallEnvelope,
    wait: bool,
) -> Result<(Hash32, Option<Receipt>)> {
    let sender = key.address();
    let tx_hash = {
        let lock = state.sender_lock(sender);
        let _guard = lock.lock().await;
        let nonce = state.node.next_nonce(&sender);
        let tx = SignedTransaction::create(
            key,
            state.node.chain_id(),
            nonce,
            TxTarget::Contract(target),
            envelope.encode()?,
        )?;
        state.node.submit_transaction(tx)?
    };
    if !wait {
        return Ok((tx_hash, None));
    }
    let deadline = tokio::time::Instant::now() + RECEIPT_WAIT;
    let receipt = loop {
        if let Some(receipt) = state.node.receipt(&tx_hash) {
            break receipt;
        }
        if tokio::time::Instant::now() >= deadline {
            return Err(Error::new(
                ErrorCode::Timeout,
                format!("transaction {tx_hash} not included within {RECEIPT_WAIT:?}"),
            ));
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    };
    if receipt.status == ReceiptStatus::Reverted {
        return Err(Error::new(
            receipt.error_code.unwrap_or(ErrorCode::BadArgs),
            receipt
                .revert_reason
                .clone()
                .unwrap_or_else(|| "reverted".to_string()),
        ));
    }
    Ok((tx_hash, Some(receipt)))
}

fn event_attr<'a>(receipt: &'a Option<Receipt>, event: &str, attr: &str) -> Option<&'a str> {
    receipt.as_ref().and_then(|r| {
        r.emitted_events
            .iter()
            .find(|e: &&Event| e.name == event)
            .and_then(|e| e.attributes.get(attr))
            .map(String::as_str)
    })
}

fn outcome_value(tx_hash: Hash32, receipt: Option<Receipt>, extras: Value) -> Result<Value> {
    let mut out = json!({
        "tx_hash": tx_hash.to_hex(),
        "receipt": receipt,
    });
    if let (Value::Object(base), Value::Object(extra)) = (&mut out, extras) {
        base.extend(extra);
    }
    Ok(out)
}

fn registry_for_project(node: &Node, project_id: &str) -> Result<Address> {
    let descriptor = node.query(registry_factory_address(), &calls::get_registry(project_id))?;
    let descriptor: RegistryDescriptor = serde_json::from_value(descriptor)
        .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad descriptor: {e}")))?;
    Ok(descriptor.registry_address)
}

fn list_all_registries(node: &Node) -> Result<Vec<RegistryDescriptor>> {
    let value = node.query(registry_factory_address(), &calls::list_registries(None))?;
    serde_json::from_value(value)
        .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad descriptor list: {e}")))
}

fn registry_for_uuid(node: &Node, uuid: &str) -> Result<Address> {
    for descriptor in list_all_registries(node)? {
        let found = node.query(descriptor.registry_address, &calls::has_dataset(uuid))?;
        if found == Value::Bool(true) {
            return Ok(descriptor.registry_address);
        }
    }
    Err(Error::new(
        ErrorCode::NoSuchDataset,
        format!("no registry holds dataset {uuid}"),
    ))
}

// --- handlers ---

async fn health(State(state): State<AppState>) -> ApiResult {
    ok(json!({
        "ok": true,
        "height": state.node.height(),
        "state_root": state.node.state_root().to_hex(),
        "chain_id": state.node.chain_id(),
    }))
}

async fn register_identity(
    State(state): State<AppState>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<RegisterIdentityRequest>,
) -> ApiResult {
    let (address, key) = caller_key(&state, &headers)?;
    let args = RegisterIdentityArgs {
        address,
        public_key: hex::encode(key.public_key_bytes()),
        display_name: req.display_name,
        organisation: req.organisation,
        service_endpoint: req.service_endpoint,
    };
    let envelope = calls::register_identity(&args)?;
    let (tx_hash, receipt) =
        submit(&state, &key, identity_registry_address(), &envelope, q.wait()).await?;
    ok(outcome_value(
        tx_hash,
        receipt,
        json!({"address": address.to_hex()}),
    )?)
}

async fn get_identity(State(state): State<AppState>, Path(address): Path<String>) -> ApiResult {
    let address = Address::from_hex(&address)?;
    let record = state
        .node
        .query(identity_registry_address(), &calls::resolve_identity(address))?;
    ok(record)
}

async fn update_endpoint(
    State(state): State<AppState>,
    Path(address): Path<String>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<UpdateEndpointRequest>,
) -> ApiResult {
    let target_address = Address::from_hex(&address)?;
    let (caller_address, key) = caller_key(&state, &headers)?;
    if caller_address != target_address {
        return Err(Error::new(
            ErrorCode::AddressMismatch,
            format!("caller key is {caller_address}, path names {target_address}"),
        )
        .into());
    }
    let envelope = calls::update_endpoint(&req.service_endpoint);
    let (tx_hash, receipt) =
        submit(&state, &key, identity_registry_address(), &envelope, q.wait()).await?;
    ok(outcome_value(tx_hash, receipt, json!({}))?)
}

async fn deploy_registry(
    State(state): State<AppState>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<DeployRegistryRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let initial_acl = req
        .initial_acl
        .iter()
        .map(|a| Address::from_hex(a))
        .collect::<Result<Vec<_>>>()?;
    let args = DeployRegistryArgs {
        project_id: req.project_id,
        project_name: req.project_name,
        initial_acl,
        schema_config: req.schema_config.unwrap_or_default(),
    };
    let envelope = calls::deploy_registry(&args)?;
    let (tx_hash, receipt) =
        submit(&state, &key, registry_factory_address(), &envelope, q.wait()).await?;
    let registry_address = event_attr(&receipt, "REGISTRY_DEPLOYED", "registry_address")
        .map(str::to_string);
    ok(outcome_value(
        tx_hash,
        receipt,
        json!({"registry_address": registry_address}),
    )?)
}

#[derive(Debug, Deserialize)]
struct RegistriesQuery {
    owner: Option<String>,
}

async fn list_registries(
    State(state): State<AppState>,
    Query(q): Query<RegistriesQuery>,
) -> ApiResult {
    let owner = match q.owner.as_deref() {
        Some(o) => Some(Address::from_hex(o)?),
        None => None,
    };
    let value = state
        .node
        .query(registry_factory_address(), &calls::list_registries(owner))?;
    ok(value)
}

async fn grants(
    State(state): State<AppState>,
    Path(project_id): Path<String>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<GrantRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let registry = registry_for_project(&state.node, &project_id)?;
    let grantee = Address::from_hex(&req.grantee)?;
    let envelope = match (req.scope.as_str(), req.action.as_str()) {
        ("project", "grant") => calls::grant_project_access(grantee),
        ("project", "revoke") => calls::revoke_project_access(grantee),
        ("dataset", action) => {
            let uuid = req.uuid.as_deref().ok_or_else(|| {
                Error::new(ErrorCode::BadArgs, "dataset-scope grants need a uuid")
            })?;
            match action {
                "grant" => calls::grant_dataset_access(uuid, grantee),
                "revoke" => calls::revoke_dataset_access(uuid, grantee),
                other => {
                    return Err(Error::new(
                        ErrorCode::BadArgs,
                        format!("action must be grant or revoke, got {other}"),
                    )
                    .into())
                }
            }
        }
        (scope, _) => {
            return Err(Error::new(
                ErrorCode::BadArgs,
                format!("scope must be project or dataset, got {scope}"),
            )
            .into())
        }
    };
    let (tx_hash, receipt) = submit(&state, &key, registry, &envelope, q.wait()).await?;
    ok(outcome_value(tx_hash, receipt, json!({}))?)
}

async fn create_dataset(
    State(state): State<AppState>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<CreateDatasetRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let registry = registry_for_project(&state.node, &req.project_id)?;
    let envelope = calls::create_dataset(
        &req.project_id,
        req.year,
        &req.uuid,
        &req.file_name,
        &req.version,
    )?;
    let (tx_hash, receipt) = submit(&state, &key, registry, &envelope, q.wait()).await?;
    let uuid = event_attr(&receipt, "DATASET_CREATED", "uuid").map(str::to_string);
    ok(outcome_value(
        tx_hash,
        receipt,
        json!({"uuid": uuid, "version": 1}),
    )?)
}

async fn add_version(
    State(state): State<AppState>,
    Path(uuid): Path<String>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<databom_generator::client::AddVersionRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let registry = registry_for_uuid(&state.node, &uuid)?;
    let envelope = calls::add_version(&uuid, &req.version)?;
    let (tx_hash, receipt) = submit(&state, &key, registry, &envelope, q.wait()).await?;
    let version = event_attr(&receipt, "VERSION_ADDED", "version")
        .and_then(|v| v.parse::<u32>().ok());
    ok(outcome_value(
        tx_hash,
        receipt,
        json!({"uuid": uuid, "version": version}),
    )?)
}

async fn merge_datasets(
    State(state): State<AppState>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<MergeRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let registry = registry_for_project(&state.node, &req.project_id)?;
    let envelope = calls::register_merge(
        &req.project_id,
        req.year,
        &req.new_uuid,
        &req.file_name,
        &req.parents,
        &req.version,
    )?;
    let (tx_hash, receipt) = submit(&state, &key, registry, &envelope, q.wait()).await?;
    let uuid = event_attr(&receipt, "MERGED", "uuid").map(str::to_string);
    ok(outcome_value(
        tx_hash,
        receipt,
        json!({"uuid": uuid, "version": 1}),
    )?)
}

#[derive(Debug, Deserialize)]
struct CatalogueQuery {
    project: Option<String>,
    year: Option<u16>,
    licence: Option<String>,
    q: Option<String>,
    reader: Option<String>,
}

async fn list_datasets(
    State(state): State<AppState>,
    Query(q): Query<CatalogueQuery>,
    headers: HeaderMap,
) -> ApiResult {
    let reader = reader_address(&state, &headers, q.reader.as_deref());
    let filter = CatalogueFilter {
        project: q.project.clone(),
        year: q.year,
        licence: q.licence.clone(),
        q: q.q.clone(),
    };
    let mut rows: Vec<CatalogueRow> = Vec::new();
    for descriptor in list_all_registries(&state.node)? {
        if let Some(project) = &filter.project {
            if project != &descriptor.project_id {
                continue;
            }
        }
        let value = state.node.query(
            descriptor.registry_address,
            &calls::list_catalogue(&filter, reader)?,
        )?;
        let mut registry_rows: Vec<CatalogueRow> = serde_json::from_value(value)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad catalogue rows: {e}")))?;
        rows.append(&mut registry_rows);
    }
    rows.sort();
    ok(serde_json::to_value(rows).map_err(|e| Error::new(ErrorCode::BadArgs, e.to_string()))?)
}

#[derive(Debug, Deserialize)]
struct ReaderQuery {
    reader: Option<String>,
}

async fn get_version(
    State(state): State<AppState>,
    Path((uuid, number)): Path<(String, u32)>,
    Query(q): Query<ReaderQuery>,
    headers: HeaderMap,
) -> ApiResult {
    let reader = reader_address(&state, &headers, q.reader.as_deref());
    let registry = registry_for_uuid(&state.node, &uuid)?;
    let value = state
        .node
        .query(registry, &calls::get_version(&uuid, number, reader))?;
    ok(value)
}

async fn latest_version(State(state): State<AppState>, Path(uuid): Path<String>) -> ApiResult {
    let registry = registry_for_uuid(&state.node, &uuid)?;
    let value = state.node.query(registry, &calls::latest_version(&uuid))?;
    ok(value)
}

async fn set_disclosure(
    State(state): State<AppState>,
    Query(q): Query<MutQuery>,
    headers: HeaderMap,
    Json(req): Json<DisclosureRequest>,
) -> ApiResult {
    let (_, key) = caller_key(&state, &headers)?;
    let registry = registry_for_project(&state.node, &req.project_id)?;
    let envelope = calls::set_disclosure_policy(&req.scope, &req.policy, req.uuid.as_deref())?;
    let (tx_hash, receipt) = submit(&state, &key, registry, &envelope, q.wait()).await?;
    ok(outcome_value(tx_hash, receipt, json!({}))?)
}

async fn lineage_query(
    State(state): State<AppState>,
    Path((uuid, version, query)): Path<(String, u32, String)>,
) -> ApiResult {
    let value = match query.as_str() {
        "trace" => serde_json::to_value(state.lineage.trace(&uuid, version)?),
        "verify" => serde_json::to_value(state.lineage.verify_licences(
            &uuid,
            version,
            &state.matrix,
        )?),
        "replay" => serde_json::to_value(state.lineage.replay_plan(&uuid, version)?),
        "account" => serde_json::to_value(state.lineage.account(&uuid, version)?),
        other => {
            return Err(Error::new(
                ErrorCode::NoSuchMethod,
                format!("unknown lineage query {other}; use trace|verify|replay|account"),
            )
            .into())
        }
    };
    ok(value.map_err(|e| Error::new(ErrorCode::BadArgs, e.to_string()))?)
}

pub fn build_router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/identities", post(register_identity))
        .route("/identities/{address}", get(get_identity))
        .route("/identities/{address}/endpoint", put(update_endpoint))
        .route("/registries", post(deploy_registry).get(list_registries))
        .route("/registries/{project_id}/grants", post(grants))
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/merge", post(merge_datasets))
        .route("/datasets/{uuid}/versions", post(add_version))
        .route("/datasets/{uuid}/versions/{number}", get(get_version))
        .route("/datasets/{uuid}/latest", get(latest_version))
        .route("/disclosure", put(set_disclosure))
        .route("/lineage/{uuid}/{version}/{query}", get(lineage_query))
        .with_state(state)
}
