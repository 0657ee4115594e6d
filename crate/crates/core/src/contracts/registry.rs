//! DataBOM registry contract: the project / year / dataset / version
//! hierarchy with embedded permissions and selective disclosure.
//!
//! One registry instance serves one project. Project-level ACL members may
//! create datasets; dataset-level ACL members may append versions. Version
//! records are append-only and carry the minimal metadata set: identifier,
//! licence, content hash, operation history, dependencies, data paths and
//! creator. Reads apply disclosure policies, replacing hidden fields with
//! SHA-256 commitments so granted readers can verify the plaintext later.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{canonical_digest, to_canonical_value};
use crate::contracts::factory::SchemaConfig;
use crate::contracts::identity::IdentityRegistryState;
use crate::crypto::{Address, Hash32};
use crate::error::{Error, ErrorCode, Result};
use crate::runtime::{ExecutionContext, MutationOutcome};
use crate::tx::{CallEnvelope, Event};

pub mod op_kinds {
    pub const INGEST: &str = "INGEST";
    pub const QA_QC: &str = "QA_QC";
    pub const SUBSET: &str = "SUBSET";
    pub const RECHUNK: &str = "RECHUNK";
    pub const MERGE: &str = "MERGE";
    pub const CORRECTION: &str = "CORRECTION";
    pub const STANDARD: [&str; 6] = [INGEST, QA_QC, SUBSET, RECHUNK, MERGE, CORRECTION];
}

/// One recorded transformation step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationStep {
    pub op_kind: String,
    pub parameters: BTreeMap<String, String>,
    pub actor: Address,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyRef {
    pub uuid: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRecord {
    pub version_number: u32,
    pub content_hash: Hash32,
    pub licence: String,
    pub summary: String,
    pub history: Vec<OperationStep>,
    pub dependencies: Vec<DependencyRef>,
    pub data_paths: Vec<String>,
    pub creator: Address,
    pub created_at_height: u64,
    pub change_note: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub uuid: String,
    pub file_name: String,
    pub dataset_acl: BTreeSet<Address>,
    pub created_by: Address,
    pub year: u16,
    pub versions: Vec<VersionRecord>,
}

impl DatasetEntry {
    pub fn latest(&self) -> &VersionRecord {
        self.versions.last().expect("datasets hold at least one version")
    }

    pub fn version(&self, n: u32) -> Result<&VersionRecord> {
        if n == 0 || n as usize > self.versions.len() {
            return Err(Error::new(
                ErrorCode::NoSuchVersion,
                format!("dataset {} has no version {n}", self.uuid),
            ));
        }
        Ok(&self.versions[n as usize - 1])
    }
}

/// Metadata fields a disclosure policy may hide. The verifiability floor
/// (uuid, version, licence, content hash) is never hideable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenField {
    Summary,
    History,
    DataPaths,
}

impl HiddenField {
    fn parse(s: &str) -> Result<HiddenField> {
        match s {
            "summary" => Ok(HiddenField::Summary),
            "history" => Ok(HiddenField::History),
            "data_paths" => Ok(HiddenField::DataPaths),
            other => Err(Error::new(
                ErrorCode::BadField,
                format!("field {other} cannot be hidden"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightInterval {
    pub from_height: u64,
    pub to_height: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosurePolicy {
    pub hidden_fields: BTreeSet<HiddenField>,
    pub grantees: BTreeSet<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<HeightInterval>,
}

impl DisclosurePolicy {
    /// Whether hiding is in force at the given height for the given reader.
    fn hides_from(&self, reader: &Address, height: u64) -> bool {
        if self.hidden_fields.is_empty() || self.grantees.contains(reader) {
            return false;
        }
        match self.interval {
            Some(iv) => height >= iv.from_height && height <= iv.to_height,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub name: String,
    pub owner: Address,
    pub project_acl: BTreeSet<Address>,
    /// year -> dataset uuids, in creation order.
    pub years: BTreeMap<u16, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disclosure_policy: Option<DisclosurePolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabomRegistryState {
    pub project: Option<Project>,
    pub datasets: BTreeMap<String, DatasetEntry>,
    pub dataset_policies: BTreeMap<String, DisclosurePolicy>,
    pub schema: SchemaConfig,
}

impl DatabomRegistryState {
    pub fn new(schema: SchemaConfig) -> DatabomRegistryState {
        DatabomRegistryState {
            project: None,
            datasets: BTreeMap::new(),
            dataset_policies: BTreeMap::new(),
            schema,
        }
    }

    pub fn project(&self) -> Result<&Project> {
        self.project.as_ref().ok_or_else(|| {
            Error::new(ErrorCode::NotAuthorised, "registry has no project yet")
        })
    }

    fn project_mut(&mut self) -> Result<&mut Project> {
        self.project.as_mut().ok_or_else(|| {
            Error::new(ErrorCode::NotAuthorised, "registry has no project yet")
        })
    }

    pub fn dataset(&self, uuid: &str) -> Result<&DatasetEntry> {
        self.datasets.get(uuid).ok_or_else(|| {
            Error::new(ErrorCode::NoSuchDataset, format!("no dataset {uuid}"))
        })
    }

    /// One registry hosts one project; a second create is a duplicate.
    pub fn init_project(
        &mut self,
        project_id: &str,
        name: &str,
        owner: Address,
        initial_acl: &[Address],
        height: u64,
    ) -> Result<()> {
        if self.project.is_some() {
            return Err(Error::new(
                ErrorCode::DuplicateProject,
                "registry already serves a project",
            ));
        }
        let mut project_acl: BTreeSet<Address> = initial_acl.iter().copied().collect();
        project_acl.insert(owner);
        self.project = Some(Project {
            project_id: project_id.to_string(),
            name: name.to_string(),
            owner,
            project_acl,
            years: BTreeMap::new(),
            disclosure_policy: None,
        });
        let _ = height;
        Ok(())
    }
}

/// Wire shape shared by dataset creation, version addition and merges.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VersionInput {
    #[serde(default)]
    pub licence: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub content_hash: Option<Hash32>,
    #[serde(default)]
    pub dependencies: Vec<DependencyRef>,
    #[serde(default)]
    pub data_paths: Vec<String>,
    #[serde(default)]
    pub operations: Vec<OperationInput>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub change_note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperationInput {
    pub op_kind: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

fn normalize_uuid(raw: &str) -> Result<String> {
    let parsed = uuid::Uuid::parse_str(raw)
        .map_err(|e| Error::new(ErrorCode::BadUuid, format!("bad uuid {raw:?}: {e}")))?;
    Ok(parsed.to_string())
}

fn missing(field: &str) -> Error {
    Error::new(ErrorCode::MissingField, format!("required field {field} is missing"))
}

impl DatabomRegistryState {
    fn validate_version_input(&self, input: &VersionInput) -> Result<Hash32> {
        if input.licence.is_empty() {
            return Err(missing("licence"));
        }
        if !self.schema.licence_allowlist.contains(&input.licence) {
            return Err(Error::new(
                ErrorCode::UnknownLicence,
                format!("licence {} not in registry allowlist", input.licence),
            ));
        }
        let content_hash = input.content_hash.ok_or_else(|| missing("content_hash"))?;
        if input.data_paths.is_empty() || input.data_paths.iter().any(|p| p.is_empty()) {
            return Err(missing("data_paths"));
        }
        for field in &self.schema.extra_required_fields {
            match input.attributes.get(field) {
                Some(v) if !v.is_empty() => {}
                _ => return Err(missing(field)),
            }
        }
        for op in &input.operations {
            if !self.schema.operation_vocabulary.contains(&op.op_kind) {
                return Err(Error::new(
                    ErrorCode::UnknownOperation,
                    format!("operation kind {} not in registry vocabulary", op.op_kind),
                ));
            }
        }
        Ok(content_hash)
    }

    /// Dependencies must resolve to records created at a strictly earlier
    /// block height, which keeps the lineage graph acyclic by construction.
    fn validate_dependencies(&self, deps: &[DependencyRef], height: u64) -> Result<Vec<DependencyRef>> {
        let mut normalized = Vec::with_capacity(deps.len());
        for dep in deps {
            let dep_uuid = normalize_uuid(&dep.uuid)?;
            let dataset = self.datasets.get(&dep_uuid).ok_or_else(|| {
                Error::new(
                    ErrorCode::DanglingDependency,
                    format!("dependency ({dep_uuid}, {}) does not resolve", dep.version),
                )
            })?;
            let record = dataset.version(dep.version).map_err(|_| {
                Error::new(
                    ErrorCode::DanglingDependency,
                    format!("dependency ({dep_uuid}, {}) does not resolve", dep.version),
                )
            })?;
            if record.created_at_height >= height {
                return Err(Error::new(
                    ErrorCode::DanglingDependency,
                    format!(
                        "dependency ({dep_uuid}, {}) was not created at an earlier height",
                        dep.version
                    ),
                ));
            }
            normalized.push(DependencyRef {
                uuid: dep_uuid,
                version: dep.version,
            });
        }
        Ok(normalized)
    }

    fn build_steps(&self, ops: &[OperationInput], ctx: &ExecutionContext) -> Vec<OperationStep> {
        ops.iter()
            .map(|op| OperationStep {
                op_kind: op.op_kind.clone(),
                parameters: op.parameters.clone(),
                actor: ctx.sender,
                timestamp_ms: ctx.block_timestamp_ms,
            })
            .collect()
    }

    fn store_dataset(
        &mut self,
        uuid: String,
        file_name: String,
        year: u16,
        input: &VersionInput,
        history: Vec<OperationStep>,
        dependencies: Vec<DependencyRef>,
        ctx: &ExecutionContext,
    ) -> Result<()> {
        let content_hash = input.content_hash.expect("validated earlier");
        let record = VersionRecord {
            version_number: 1,
            content_hash,
            licence: input.licence.clone(),
            summary: input.summary.clone(),
            history,
            dependencies,
            data_paths: input.data_paths.clone(),
            creator: ctx.sender,
            created_at_height: ctx.block_height,
            change_note: input.change_note.clone(),
            attributes: input.attributes.clone(),
        };
        let entry = DatasetEntry {
            uuid: uuid.clone(),
            file_name,
            dataset_acl: BTreeSet::from([ctx.sender]),
            created_by: ctx.sender,
            year,
            versions: vec![record],
        };
        self.datasets.insert(uuid.clone(), entry);
        self.project_mut()?
            .years
            .entry(year)
            .or_default()
            .push(uuid);
        Ok(())
    }
}

fn validate_year(year: u16) -> Result<u16> {
    if (1000..=9999).contains(&year) {
        Ok(year)
    } else {
        Err(Error::new(
            ErrorCode::InvalidYear,
            format!("year {year} is not a 4-digit calendar year"),
        ))
    }
}

pub fn apply(
    state: &mut DatabomRegistryState,
    identities: &IdentityRegistryState,
    ctx: &ExecutionContext,
    call: &CallEnvelope,
) -> Result<MutationOutcome> {
    match call.method.as_str() {
        "create_project" => {
            let project_id: String = call.arg(0, "project_id")?;
            let name: String = call.arg(1, "name")?;
            let initial_acl: Vec<Address> = call.arg(2, "initial_acl").unwrap_or_default();
            identities.require_registered(&ctx.sender, "project owner")?;
            for member in &initial_acl {
                identities.require_registered(member, "initial ACL member")?;
            }
            state.init_project(&project_id, &name, ctx.sender, &initial_acl, ctx.block_height)?;
            let acl_list = state
                .project()?
                .project_acl
                .iter()
                .map(|a| a.to_hex())
                .collect::<Vec<_>>()
                .join(",");
            Ok(MutationOutcome::with_events(vec![Event::new(
                "PROJECT_CREATED",
                &[
                    ("project_id", project_id),
                    ("owner", ctx.sender.to_hex()),
                    ("acl", acl_list),
                ],
            )]))
        }
        "grant_project_access" | "revoke_project_access" => {
            let grantee: Address = call.arg(0, "grantee")?;
            let granting = call.method == "grant_project_access";
            let project = state.project()?;
            if ctx.sender != project.owner {
                return Err(Error::new(
                    ErrorCode::NotOwner,
                    format!("only the project owner may change the project ACL, not {}", ctx.sender),
                ));
            }
            if granting {
                identities.require_registered(&grantee, "grantee")?;
            }
            if !granting && grantee == project.owner {
                return Err(Error::new(
                    ErrorCode::ImmutableOwner,
                    "the project owner cannot be revoked",
                ));
            }
            let project = state.project_mut()?;
            let (event, changed) = if granting {
                ("GRANTED", project.project_acl.insert(grantee))
            } else {
                ("REVOKED", project.project_acl.remove(&grantee))
            };
            let _ = changed;
            Ok(MutationOutcome::with_events(vec![Event::new(
                event,
                &[
                    ("scope", "project".to_string()),
                    ("project_id", project.project_id.clone()),
                    ("grantee", grantee.to_hex()),
                ],
            )]))
        }
        "grant_dataset_access" | "revoke_dataset_access" => {
            let uuid_raw: String = call.arg(0, "uuid")?;
            let grantee: Address = call.arg(1, "grantee")?;
            let uuid = normalize_uuid(&uuid_raw)?;
            let granting = call.method == "grant_dataset_access";
            let owner = state.project()?.owner;
            let dataset = state.dataset(&uuid)?;
            if ctx.sender != owner && ctx.sender != dataset.created_by {
                return Err(Error::new(
                    ErrorCode::NotOwner,
                    "only the project owner or the dataset creator may change a dataset ACL",
                ));
            }
            if granting {
                identities.require_registered(&grantee, "grantee")?;
            } else if grantee == dataset.created_by {
                return Err(Error::new(
                    ErrorCode::ImmutableOwner,
                    "the dataset creator cannot be revoked",
                ));
            }
            let entry = state.datasets.get_mut(&uuid).expect("checked above");
            let event = if granting {
                entry.dataset_acl.insert(grantee);
                "GRANTED"
            } else {
                entry.dataset_acl.remove(&grantee);
                "REVOKED"
            };
            Ok(MutationOutcome::with_events(vec![Event::new(
                event,
                &[
                    ("scope", "dataset".to_string()),
                    ("uuid", uuid),
                    ("grantee", grantee.to_hex()),
                ],
            )]))
        }
        "create_dataset" => {
            let project_id: String = call.arg(0, "project_id")?;
            let year: u16 = call.arg(1, "year")?;
            let uuid_raw: String = call.arg(2, "uuid")?;
            let file_name: String = call.arg(3, "file_name")?;
            let input: VersionInput = call.arg(4, "version")?;

            identities.require_registered(&ctx.sender, "dataset creator")?;
            let project = state.project()?;
            if project.project_id != project_id {
                return Err(Error::new(
                    ErrorCode::NoSuchDataset,
                    format!("registry serves project {}, not {project_id}", project.project_id),
                ));
            }
            if !project.project_acl.contains(&ctx.sender) {
                return Err(Error::new(
                    ErrorCode::NotAuthorised,
                    format!("{} is not in the project ACL", ctx.sender),
                ));
            }
            let year = validate_year(year)?;
            if uuid_raw.is_empty() {
                return Err(missing("uuid"));
            }
            let uuid = normalize_uuid(&uuid_raw)?;
            if file_name.is_empty() {
                return Err(missing("file_name"));
            }
            if state.datasets.contains_key(&uuid) {
                return Err(Error::new(
                    ErrorCode::DuplicateUuid,
                    format!("dataset {uuid} already exists"),
                ));
            }
            state.validate_version_input(&input)?;
            let dependencies = state.validate_dependencies(&input.dependencies, ctx.block_height)?;
            let history = state.build_steps(&input.operations, ctx);
            state.store_dataset(uuid.clone(), file_name, year, &input, history, dependencies, ctx)?;
            Ok(MutationOutcome::with_events(vec![Event::new(
                "DATASET_CREATED",
                &[
                    ("uuid", uuid),
                    ("year", year.to_string()),
                    ("creator", ctx.sender.to_hex()),
                ],
            )]))
        }
        "add_version" => {
            let uuid_raw: String = call.arg(0, "uuid")?;
            let input: VersionInput = call.arg(1, "version")?;
            let uuid = normalize_uuid(&uuid_raw)?;

            identities.require_registered(&ctx.sender, "version creator")?;
            let dataset = state.dataset(&uuid)?;
            if !dataset.dataset_acl.contains(&ctx.sender) {
                return Err(Error::new(
                    ErrorCode::NotAuthorised,
                    format!("{} is not in the dataset ACL of {uuid}", ctx.sender),
                ));
            }
            let content_hash = state.validate_version_input(&input)?;
            let dataset = state.dataset(&uuid)?;
            if dataset.latest().content_hash == content_hash {
                return Err(Error::new(
                    ErrorCode::UnchangedContent,
                    "content hash equals the previous version",
                ));
            }
            let next_number = dataset.latest().version_number + 1;
            let dependencies = state.validate_dependencies(&input.dependencies, ctx.block_height)?;
            let history = state.build_steps(&input.operations, ctx);
            let record = VersionRecord {
                version_number: next_number,
                content_hash,
                licence: input.licence.clone(),
                summary: input.summary.clone(),
                history,
                dependencies,
                data_paths: input.data_paths.clone(),
                creator: ctx.sender,
                created_at_height: ctx.block_height,
                change_note: input.change_note.clone(),
                attributes: input.attributes.clone(),
            };
            state
                .datasets
                .get_mut(&uuid)
                .expect("checked above")
                .versions
                .push(record);
            Ok(MutationOutcome::with_events(vec![Event::new(
                "VERSION_ADDED",
                &[
                    ("uuid", uuid),
                    ("version", next_number.to_string()),
                    ("creator", ctx.sender.to_hex()),
                ],
            )]))
        }
        "register_merge" => {
            let project_id: String = call.arg(0, "project_id")?;
            let year: u16 = call.arg(1, "year")?;
            let new_uuid_raw: String = call.arg(2, "new_uuid")?;
            let file_name: String = call.arg(3, "file_name")?;
            let parents: Vec<DependencyRef> = call.arg(4, "parents")?;
            let mut input: VersionInput = call.arg(5, "version")?;

            identities.require_registered(&ctx.sender, "merge creator")?;
            let project = state.project()?;
            if project.project_id != project_id {
                return Err(Error::new(
                    ErrorCode::NoSuchDataset,
                    format!("registry serves project {}, not {project_id}", project.project_id),
                ));
            }
            if !project.project_acl.contains(&ctx.sender) {
                return Err(Error::new(
                    ErrorCode::NotAuthorised,
                    format!("{} is not in the project ACL", ctx.sender),
                ));
            }
            if parents.len() < 2 {
                return Err(Error::new(
                    ErrorCode::TooFewParents,
                    format!("a merge needs at least 2 parents, got {}", parents.len()),
                ));
            }
            let year = validate_year(year)?;
            let new_uuid = normalize_uuid(&new_uuid_raw)?;
            if file_name.is_empty() {
                return Err(missing("file_name"));
            }
            if state.datasets.contains_key(&new_uuid) {
                return Err(Error::new(
                    ErrorCode::DuplicateUuid,
                    format!("dataset {new_uuid} already exists"),
                ));
            }
            state.validate_version_input(&input)?;
            // A merged dataset's v1 dependencies are exactly the parent list.
            let dependencies = state.validate_dependencies(&parents, ctx.block_height)?;
            input.dependencies = dependencies.clone();
            let parent_list = dependencies
                .iter()
                .map(|d| format!("{}:{}", d.uuid, d.version))
                .collect::<Vec<_>>()
                .join(",");
            let mut history = vec![OperationStep {
                op_kind: op_kinds::MERGE.to_string(),
                parameters: BTreeMap::from([("parents".to_string(), parent_list)]),
                actor: ctx.sender,
                timestamp_ms: ctx.block_timestamp_ms,
            }];
            history.extend(state.build_steps(&input.operations, ctx));
            state.store_dataset(
                new_uuid.clone(),
                file_name,
                year,
                &input,
                history,
                dependencies,
                ctx,
            )?;
            Ok(MutationOutcome::with_events(vec![Event::new(
                "MERGED",
                &[
                    ("uuid", new_uuid),
                    ("year", year.to_string()),
                    ("creator", ctx.sender.to_hex()),
                ],
            )]))
        }
        "set_disclosure_policy" => {
            let scope: String = call.arg(0, "scope")?;
            let input: PolicyInput = call.arg(1, "policy")?;
            let policy = input.parse()?;
            match scope.as_str() {
                "project" => {
                    let project = state.project()?;
                    if ctx.sender != project.owner {
                        return Err(Error::new(
                            ErrorCode::NotAuthorised,
                            "only the project owner may set the project disclosure policy",
                        ));
                    }
                    state.project_mut()?.disclosure_policy = Some(policy);
                    Ok(MutationOutcome::with_events(vec![Event::new(
                        "POLICY_SET",
                        &[("scope", "project".to_string())],
                    )]))
                }
                "dataset" => {
                    let uuid_raw: String = call.arg(2, "uuid")?;
                    let uuid = normalize_uuid(&uuid_raw)?;
                    let dataset = state.dataset(&uuid)?;
                    if !dataset.dataset_acl.contains(&ctx.sender) {
                        return Err(Error::new(
                            ErrorCode::NotAuthorised,
                            format!("{} is not in the dataset ACL of {uuid}", ctx.sender),
                        ));
                    }
                    state.dataset_policies.insert(uuid.clone(), policy);
                    Ok(MutationOutcome::with_events(vec![Event::new(
                        "POLICY_SET",
                        &[("scope", "dataset".to_string()), ("uuid", uuid)],
                    )]))
                }
                other => Err(Error::new(
                    ErrorCode::BadArgs,
                    format!("scope must be project or dataset, got {other}"),
                )),
            }
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("databom registry has no method {other}"),
        )),
    }
}

/// Wire shape for `set_disclosure_policy`: field names arrive as strings so
/// that hiding a non-hideable field reports `BAD_FIELD`, not a decode error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyInput {
    #[serde(default)]
    pub hidden_fields: Vec<String>,
    #[serde(default)]
    pub grantees: Vec<Address>,
    #[serde(default)]
    pub interval: Option<HeightInterval>,
}

impl PolicyInput {
    fn parse(&self) -> Result<DisclosurePolicy> {
        let mut hidden_fields = BTreeSet::new();
        for name in &self.hidden_fields {
            hidden_fields.insert(HiddenField::parse(name)?);
        }
        if let Some(iv) = self.interval {
            if iv.from_height > iv.to_height {
                return Err(Error::new(
                    ErrorCode::BadArgs,
                    "interval from_height exceeds to_height",
                ));
            }
        }
        Ok(DisclosurePolicy {
            hidden_fields,
            grantees: self.grantees.iter().copied().collect(),
            interval: self.interval,
        })
    }
}

/// A possibly-redacted field value. Redacted fields carry a SHA-256
/// commitment over the canonical encoding of the hidden plaintext.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Redactable<T> {
    Visible(T),
    Redacted { redacted: bool, commitment: String },
}

impl<T: Serialize> Redactable<T> {
    fn hide(value: &T) -> Result<Redactable<T>> {
        Ok(Redactable::Redacted {
            redacted: true,
            commitment: canonical_digest(value)?.to_hex(),
        })
    }

    pub fn visible(&self) -> Option<&T> {
        match self {
            Redactable::Visible(v) => Some(v),
            Redactable::Redacted { .. } => None,
        }
    }

    pub fn commitment(&self) -> Option<&str> {
        match self {
            Redactable::Visible(_) => None,
            Redactable::Redacted { commitment, .. } => Some(commitment),
        }
    }
}

/// Read view of a version record after disclosure policies are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionView {
    pub uuid: String,
    pub file_name: String,
    pub version_number: u32,
    pub content_hash: Hash32,
    pub licence: String,
    pub summary: Redactable<String>,
    pub history: Redactable<Vec<OperationStep>>,
    pub dependencies: Vec<DependencyRef>,
    pub data_paths: Redactable<Vec<String>>,
    pub creator: Address,
    pub created_at_height: u64,
    pub change_note: String,
    pub attributes: BTreeMap<String, String>,
}

impl DatabomRegistryState {
    fn effective_policy(&self, uuid: &str) -> Option<&DisclosurePolicy> {
        self.dataset_policies.get(uuid).or_else(|| {
            self.project
                .as_ref()
                .and_then(|p| p.disclosure_policy.as_ref())
        })
    }

    /// Builds the redacted read view of one version for the given reader.
    pub fn version_view(
        &self,
        uuid: &str,
        number: u32,
        reader: &Address,
        height: u64,
    ) -> Result<VersionView> {
        let dataset = self.dataset(uuid)?;
        let record = dataset.version(number)?;
        let hide = match self.effective_policy(uuid) {
            Some(policy) if !dataset.dataset_acl.contains(reader) => {
                if policy.hides_from(reader, height) {
                    policy.hidden_fields.clone()
                } else {
                    BTreeSet::new()
                }
            }
            _ => BTreeSet::new(),
        };
        let summary = if hide.contains(&HiddenField::Summary) {
            Redactable::hide(&record.summary)?
        } else {
            Redactable::Visible(record.summary.clone())
        };
        let history = if hide.contains(&HiddenField::History) {
            Redactable::hide(&record.history)?
        } else {
            Redactable::Visible(record.history.clone())
        };
        let data_paths = if hide.contains(&HiddenField::DataPaths) {
            Redactable::hide(&record.data_paths)?
        } else {
            Redactable::Visible(record.data_paths.clone())
        };
        Ok(VersionView {
            uuid: dataset.uuid.clone(),
            file_name: dataset.file_name.clone(),
            version_number: record.version_number,
            content_hash: record.content_hash,
            licence: record.licence.clone(),
            summary,
            history,
            dependencies: record.dependencies.clone(),
            data_paths,
            creator: record.creator,
            created_at_height: record.created_at_height,
            change_note: record.change_note.clone(),
            attributes: record.attributes.clone(),
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogueFilter {
    #[serde(default)]
    pub project: Option<String>,
    #[serde(default)]
    pub year: Option<u16>,
    #[serde(default)]
    pub licence: Option<String>,
    #[serde(default)]
    pub q: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CatalogueRow {
    pub project_id: String,
    pub year: u16,
    pub uuid: String,
    pub file_name: String,
    pub latest_version: u32,
    pub licence: String,
}

/// Full lineage export of one dataset (operator-level view, no redaction).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportedDataset {
    pub project_id: String,
    pub uuid: String,
    pub file_name: String,
    pub year: u16,
    pub created_by: Address,
    pub versions: Vec<VersionRecord>,
}

pub fn query(
    state: &DatabomRegistryState,
    call: &CallEnvelope,
    height: u64,
) -> Result<Value> {
    match call.method.as_str() {
        "get_version" => {
            let uuid_raw: String = call.arg(0, "uuid")?;
            let number: u32 = call.arg(1, "version_number")?;
            let reader: Address = call.arg(2, "reader").unwrap_or(Address::ZERO);
            let uuid = normalize_uuid(&uuid_raw)?;
            to_canonical_value(&state.version_view(&uuid, number, &reader, height)?)
        }
        "latest_version" => {
            let uuid_raw: String = call.arg(0, "uuid")?;
            let uuid = normalize_uuid(&uuid_raw)?;
            let dataset = state.dataset(&uuid)?;
            let latest = dataset.latest();
            Ok(serde_json::json!({
                "uuid": dataset.uuid,
                "version_number": latest.version_number,
                "content_hash": latest.content_hash.to_hex(),
            }))
        }
        "has_dataset" => {
            let uuid_raw: String = call.arg(0, "uuid")?;
            let uuid = normalize_uuid(&uuid_raw)?;
            Ok(Value::Bool(state.datasets.contains_key(&uuid)))
        }
        "list_catalogue" => {
            let filter: CatalogueFilter = call.arg(0, "filter").unwrap_or_default();
            let reader: Address = call.arg(1, "reader").unwrap_or(Address::ZERO);
            to_canonical_value(&list_catalogue(state, &filter, &reader, height))
        }
        "get_project" => match &state.project {
            Some(project) => to_canonical_value(project),
            None => Ok(Value::Null),
        },
        "export_records" => {
            let project_id = state
                .project
                .as_ref()
                .map(|p| p.project_id.clone())
                .unwrap_or_default();
            let exported: Vec<ExportedDataset> = state
                .datasets
                .values()
                .map(|d| ExportedDataset {
                    project_id: project_id.clone(),
                    uuid: d.uuid.clone(),
                    file_name: d.file_name.clone(),
                    year: d.year,
                    created_by: d.created_by,
                    versions: d.versions.clone(),
                })
                .collect();
            to_canonical_value(&exported)
        }
        other => Err(Error::new(
            ErrorCode::NoSuchMethod,
            format!("databom registry has no read method {other}"),
        )),
    }
}

pub fn list_catalogue(
    state: &DatabomRegistryState,
    filter: &CatalogueFilter,
    reader: &Address,
    height: u64,
) -> Vec<CatalogueRow> {
    let Some(project) = &state.project else {
        return Vec::new();
    };
    if filter
        .project
        .as_ref()
        .is_some_and(|p| p != &project.project_id)
    {
        return Vec::new();
    }
    let mut rows = Vec::new();
    for dataset in state.datasets.values() {
        if filter.year.is_some_and(|y| y != dataset.year) {
            continue;
        }
        let latest = dataset.latest();
        if filter.licence.as_ref().is_some_and(|l| l != &latest.licence) {
            continue;
        }
        if let Some(q) = &filter.q {
            let needle = q.to_lowercase();
            let view = state
                .version_view(&dataset.uuid, latest.version_number, reader, height)
                .expect("dataset and version exist");
            let in_name = dataset.file_name.to_lowercase().contains(&needle);
            let in_summary = view
                .summary
                .visible()
                .is_some_and(|s| s.to_lowercase().contains(&needle));
            if !in_name && !in_summary {
                continue;
            }
        }
        rows.push(CatalogueRow {
            project_id: project.project_id.clone(),
            year: dataset.year,
            uuid: dataset.uuid.clone(),
            file_name: dataset.file_name.clone(),
            latest_version: latest.version_number,
            licence: latest.licence.clone(),
        });
    }
    rows.sort();
    rows
}
