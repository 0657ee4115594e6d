//! Scripted end-to-end scenarios over a fresh chain.
//!
//! `fig3` walks the stakeholder interaction protocol: identity registration,
//! registry deployment, metadata storage, catalogue query, endpoint lookup,
//! access grant, a partitioned subset registered as a new version by the
//! consumer, an error report and a correcting version by the producer.
//!
//! `fig4` walks the research-project supply chain: catalogue check, dataset
//! acquisition and DataBOM creation by the data scientist, QA/subset/rechunk
//! and a DOI-carrying publication version by the researcher, an external
//! error report, an accountability review and a corrected version.
//!
//! Every step records its request/response; the run ends with the final
//! state root, which is identical across runs on a fresh chain.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use databom_core::contracts::registry::{DependencyRef, OperationInput, VersionInput};
use databom_core::crypto::Hash32;
use databom_core::error::{Error, ErrorCode, Result};
use databom_core::lineage::LicenceMatrix;
use databom_core::replay_ops;
use databom_core::ChainConfig;
use databom_generator::client::{
    CreateDatasetRequest, DeployRegistryRequest, GatewayClient, GrantRequest,
    RegisterIdentityRequest,
};
use databom_generator::scan_once;

use crate::RunningPlatform;

pub const FIG3_UUID: &str = "f1600000-0000-4000-8000-00000000f316";
pub const FIG4_UUID: &str = "f1600000-0000-4000-8000-00000000f416";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub index: usize,
    pub actor: String,
    pub action: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub name: String,
    pub steps: Vec<ScenarioStep>,
    pub final_height: u64,
    pub final_state_root: String,
}

struct Recorder {
    name: String,
    steps: Vec<ScenarioStep>,
}

impl Recorder {
    fn new(name: &str) -> Recorder {
        Recorder {
            name: name.to_string(),
            steps: Vec::new(),
        }
    }

    fn record(&mut self, actor: &str, action: &str, detail: Value) {
        let index = self.steps.len() + 1;
        log::info!("[{}] step {index}: {actor}: {action}", self.name);
        self.steps.push(ScenarioStep {
            index,
            actor: actor.to_string(),
            action: action.to_string(),
            detail,
        });
    }
}

fn scenario_chain_config(dir: &Path, name: &str) -> ChainConfig {
    let mut cfg = ChainConfig::new(dir.join("chain.log"));
    cfg.chain_id = format!("databom-{name}");
    cfg.block_interval_ms = 50;
    // Heights stay a pure function of the step sequence.
    cfg.produce_empty_blocks = false;
    cfg
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8], sidecar: &Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let artifact = dir.join(name);
    std::fs::write(&artifact, bytes)?;
    let sidecar_bytes = serde_json::to_vec_pretty(sidecar)
        .map_err(|e| Error::new(ErrorCode::BadArgs, e.to_string()))?;
    std::fs::write(dir.join(format!("{name}.databom.json")), sidecar_bytes)?;
    Ok(artifact)
}

fn fixture_rows(n: usize, tag: &str) -> Vec<u8> {
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&format!("{tag}-{i:03},{},{}\n", i * 10, 100 - i));
    }
    out.into_bytes()
}

/// Runs a named scenario in `dir` (fresh chain, its own gateway on an
/// OS-assigned port) and returns the transcript.
pub fn run_scenario(name: &str, dir: &Path) -> Result<Transcript> {
    match name {
        "fig3" => run_in_runtime(name, dir, fig3),
        "fig4" => run_in_runtime(name, dir, fig4),
        other => Err(Error::new(
            ErrorCode::BadArgs,
            format!("unknown scenario {other}; available: fig3, fig4"),
        )),
    }
}

fn run_in_runtime(
    name: &str,
    dir: &Path,
    script: fn(&RunningPlatform, &Path, &mut Recorder) -> Result<()>,
) -> Result<Transcript> {
    std::fs::create_dir_all(dir)?;
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Error::new(ErrorCode::Io, format!("runtime: {e}")))?;
    let platform = runtime.block_on(RunningPlatform::start(
        scenario_chain_config(dir, name),
        &dir.join("keys"),
        LicenceMatrix::default_matrix(),
    ))?;

    let mut recorder = Recorder::new(name);
    let result = script(&platform, dir, &mut recorder);
    let node = Arc::clone(&platform.node);
    // Let the producer drain anything still queued before reading the root.
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(5);
    while node.mempool_len() > 0 && std::time::Instant::now() < deadline {
        std::thread::sleep(std::time::Duration::from_millis(10));
    }
    let transcript = Transcript {
        name: recorder.name.clone(),
        steps: recorder.steps,
        final_height: node.height(),
        final_state_root: node.state_root().to_hex(),
    };
    platform.shutdown();
    drop(runtime);
    result.map_err(|e| {
        Error::new(
            e.code,
            format!(
                "scenario {name} failed at step {}: {}",
                transcript.steps.len() + 1,
                e.message
            ),
        )
    })?;
    Ok(transcript)
}

fn client_for(platform: &RunningPlatform, name: &str) -> GatewayClient {
    GatewayClient::new(platform.base_url()).as_caller(name)
}

fn op(kind: &str, params: &[(&str, String)]) -> OperationInput {
    OperationInput {
        op_kind: kind.to_string(),
        parameters: params
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    }
}

/// Fig. 3 protocol: producer A and consumer B.
fn fig3(platform: &RunningPlatform, dir: &Path, rec: &mut Recorder) -> Result<()> {
    let project = "fig3-sensors";
    platform.keys.generate("producer-a", Some(b"fig3-producer-a"))?;
    platform.keys.generate("consumer-b", Some(b"fig3-consumer-b"))?;
    let a = client_for(platform, "producer-a");
    let b = client_for(platform, "consumer-b");

    // 1-2: all stakeholders register on-chain identities.
    let a_reg = a.register_identity(&RegisterIdentityRequest {
        display_name: "Producer A".into(),
        organisation: "Sensor Labs".into(),
        service_endpoint: "https://producer-a.example/api".into(),
    })?;
    rec.record("producer-a", "register_identity", json!({"address": a_reg.tx_hash}));
    let b_reg = b.register_identity(&RegisterIdentityRequest {
        display_name: "Consumer B".into(),
        organisation: "Analytics Co".into(),
        service_endpoint: "https://consumer-b.example/api".into(),
    })?;
    rec.record("consumer-b", "register_identity", json!({"address": b_reg.tx_hash}));

    // 3: A deploys a DataBOM registry for the dataset's project.
    let deploy = a.deploy_registry(&DeployRegistryRequest {
        project_id: project.into(),
        project_name: "Sensor readings supply chain".into(),
        initial_acl: vec![],
        schema_config: None,
    })?;
    rec.record(
        "producer-a",
        "deploy_registry",
        json!({"registry_address": deploy.registry_address}),
    );

    // 4: A stores the selected metadata; the generator extracts and
    // registers it from A's repository directory.
    let a_dir = dir.join("repo-a");
    let v1_bytes = fixture_rows(8, "reading");
    write_artifact(
        &a_dir,
        "readings.csv",
        &v1_bytes,
        &json!({
            "uuid": FIG3_UUID,
            "licence": "CC-BY",
            "summary": "raw sensor readings, station K3",
            "data_paths": ["repo://producer-a/readings.csv"],
            "operations": [{"op_kind": "INGEST", "parameters": {}}],
        }),
    )?;
    let report = scan_once(&a, &a_dir, project, 2023);
    if report.registered != 1 || !report.failed.is_empty() {
        return Err(Error::new(
            ErrorCode::BadArgs,
            format!("expected one registration, got {report:?}"),
        ));
    }
    rec.record("producer-a", "generator_scan_store_metadata", json!(report));

    // 5: B queries the registry catalogue and reads the record.
    let rows = b.list_datasets("q=sensor")?;
    if rows.len() != 1 {
        return Err(Error::new(ErrorCode::NoSuchDataset, "catalogue miss"));
    }
    let view = b.get_version(FIG3_UUID, 1, None)?;
    rec.record(
        "consumer-b",
        "query_catalogue_and_record",
        json!({"rows": rows, "version": view.version_number}),
    );

    // 6: B retrieves producer A's identity information (service endpoint).
    let a_address = platform.keys.resolve("producer-a")?.0;
    let identity = b.get_identity(&a_address.to_hex())?;
    rec.record(
        "consumer-b",
        "resolve_producer_endpoint",
        json!({"service_endpoint": identity.service_endpoint}),
    );

    // 7: B requests access off-platform; A authorises B at dataset level.
    let grant = a.grant(
        project,
        &GrantRequest {
            scope: "dataset".into(),
            uuid: Some(FIG3_UUID.into()),
            grantee: platform.keys.resolve("consumer-b")?.0.to_hex(),
            action: "grant".into(),
        },
    )?;
    rec.record("producer-a", "authorise_consumer", json!({"tx": grant.tx_hash}));

    // 8: B partitions the dataset into the subset it needs; the generator
    // registers the tailored dataset as a new version (same identifier).
    let subset_bytes = replay_ops::subset(&v1_bytes, 2, 6);
    let b_dir = dir.join("repo-b");
    write_artifact(
        &b_dir,
        "readings.csv",
        &subset_bytes,
        &json!({
            "uuid": FIG3_UUID,
            "licence": "CC-BY",
            "summary": "rows 2-5 of station K3 readings",
            "data_paths": ["repo://consumer-b/readings.csv"],
            "dependencies": [{"uuid": FIG3_UUID, "version": 1}],
            "operations": [
                {"op_kind": "SUBSET", "parameters": {"from_row": "2", "to_row": "6"}}
            ],
            "change_note": "partitioned to the analysis subset",
        }),
    )?;
    let report = scan_once(&b, &b_dir, project, 2023);
    if report.registered != 1 || !report.failed.is_empty() {
        return Err(Error::new(
            ErrorCode::BadArgs,
            format!("expected one new version, got {report:?}"),
        ));
    }
    rec.record("consumer-b", "generator_scan_new_version", json!(report));

    // 9: B discovers abnormal data and reports it to the producer
    // (off-platform contact via the resolved service endpoint).
    rec.record(
        "consumer-b",
        "report_abnormal_data",
        json!({
            "to": identity.service_endpoint,
            "report": "row reading-003 carries an impossible negative flux",
        }),
    );

    // 10: A reviews, fixes the issue and the updated dataset triggers the
    // generator to register a correcting version with an explanation.
    let corrected = replay_ops::apply_cell_edits(&subset_bytes, "1:2:97")?;
    let fix_dir = dir.join("repo-a-fix");
    write_artifact(
        &fix_dir,
        "readings.csv",
        &corrected,
        &json!({
            "uuid": FIG3_UUID,
            "licence": "CC-BY",
            "summary": "rows 2-5 of station K3 readings, recalibrated",
            "data_paths": ["repo://producer-a/readings-corrected.csv"],
            "dependencies": [{"uuid": FIG3_UUID, "version": 2}],
            "operations": [
                {"op_kind": "CORRECTION", "parameters": {"edits": "1:2:97"}}
            ],
            "change_note": "fixed negative flux reported by consumer B",
        }),
    )?;
    let report = scan_once(&a, &fix_dir, project, 2023);
    if report.registered != 1 || !report.failed.is_empty() {
        return Err(Error::new(
            ErrorCode::BadArgs,
            format!("expected the correction version, got {report:?}"),
        ));
    }
    rec.record("producer-a", "generator_scan_correction", json!(report));

    // Closing check: one dataset, three versions.
    let latest = a.latest_version(FIG3_UUID)?;
    if latest.version_number != 3 {
        return Err(Error::new(
            ErrorCode::NoSuchVersion,
            format!("expected 3 versions, got {}", latest.version_number),
        ));
    }
    rec.record(
        "producer-a",
        "final_state",
        json!({"uuid": FIG3_UUID, "versions": latest.version_number}),
    );
    Ok(())
}

/// Fig. 4 supply chain: researcher, data scientist, external researcher.
fn fig4(platform: &RunningPlatform, dir: &Path, rec: &mut Recorder) -> Result<()> {
    let project = "fig4-climate";
    platform.keys.generate("researcher", Some(b"fig4-researcher"))?;
    platform.keys.generate("data-scientist", Some(b"fig4-datasci"))?;
    platform.keys.generate("external", Some(b"fig4-external"))?;
    let researcher = client_for(platform, "researcher");
    let scientist = client_for(platform, "data-scientist");
    let external = client_for(platform, "external");

    for (client, name, org) in [
        (&researcher, "Researcher R", "Institute of Climate"),
        (&scientist, "Data Scientist D", "Institute of Climate"),
        (&external, "External Researcher E", "Other University"),
    ] {
        let reg = client.register_identity(&RegisterIdentityRequest {
            display_name: name.into(),
            organisation: org.into(),
            service_endpoint: format!(
                "https://{}.example/contact",
                name.to_lowercase().replace(' ', "-")
            ),
        })?;
        rec.record(name, "register_identity", json!({"tx": reg.tx_hash}));
    }

    // Researcher checks the catalogue: the dataset is not yet purchased.
    let rows = researcher.list_datasets("q=reanalysis")?;
    if !rows.is_empty() {
        return Err(Error::new(ErrorCode::BadArgs, "catalogue should be empty"));
    }
    rec.record("Researcher R", "catalogue_check", json!({"matches": rows.len()}));

    // Data scientist acquires the dataset, stores it in the repository and
    // creates a DataBOM record for it.
    let deploy = scientist.deploy_registry(&DeployRegistryRequest {
        project_id: project.into(),
        project_name: "Climate reanalysis project".into(),
        initial_acl: vec![],
        schema_config: None,
    })?;
    rec.record(
        "Data Scientist D",
        "deploy_registry",
        json!({"registry_address": deploy.registry_address}),
    );

    let repo = dir.join("repo");
    let v1_bytes = fixture_rows(12, "cell");
    write_artifact(
        &repo,
        "reanalysis.csv",
        &v1_bytes,
        &json!({
            "uuid": FIG4_UUID,
            "licence": "CC-BY",
            "summary": "acquired reanalysis grid, 12 cells",
            "data_paths": ["repo://institute/reanalysis.csv"],
            "operations": [{"op_kind": "INGEST", "parameters": {}}],
            "change_note": "acquired from upstream provider",
        }),
    )?;
    let report = scan_once(&scientist, &repo, project, 2024);
    if report.registered != 1 {
        return Err(Error::new(ErrorCode::BadArgs, format!("{report:?}")));
    }
    rec.record("Data Scientist D", "create_databom_record", json!(report));

    // Researcher gets project- and dataset-level authorisation.
    for (scope, uuid) in [("project", None), ("dataset", Some(FIG4_UUID.to_string()))] {
        scientist.grant(
            project,
            &GrantRequest {
                scope: scope.into(),
                uuid,
                grantee: platform.keys.resolve("researcher")?.0.to_hex(),
                action: "grant".into(),
            },
        )?;
    }
    rec.record("Data Scientist D", "authorise_researcher", json!({}));

    // Researcher runs QA/QC, selects a subset, rechunks it, publishes the
    // paper and registers the revised dataset; the DOI rides along as an
    // additional data path.
    let qa = replay_ops::apply_cell_edits(&v1_bytes, "3:1:31;7:2:88")?;
    let sub = replay_ops::subset(&qa, 0, 8);
    let v2_bytes = replay_ops::rechunk(&sub, 4);
    let outcome = researcher.add_version(
        FIG4_UUID,
        VersionInput {
            licence: "CC-BY".into(),
            summary: "QA-checked analysis subset, rechunked for publication".into(),
            content_hash: Some(Hash32::of(&v2_bytes)),
            dependencies: vec![DependencyRef {
                uuid: FIG4_UUID.into(),
                version: 1,
            }],
            data_paths: vec![
                "repo://institute/reanalysis-paper.csv".into(),
                "https://doi.org/10.5281/zenodo.1234567".into(),
            ],
            operations: vec![
                op("QA_QC", &[("edits", "3:1:31;7:2:88".to_string())]),
                op("SUBSET", &[("from_row", "0".into()), ("to_row", "8".into())]),
                op("RECHUNK", &[("chunk_rows", "4".into())]),
            ],
            attributes: BTreeMap::new(),
            change_note: "dataset revision accompanying the published paper".into(),
        },
    )?;
    rec.record(
        "Researcher R",
        "publish_revised_dataset_with_doi",
        json!({"version": outcome.version}),
    );

    // External researcher reviews the published dataset and reports an
    // error to the institute.
    let published = external.get_version(FIG4_UUID, 2, None)?;
    rec.record(
        "External Researcher E",
        "report_error",
        json!({
            "observed": published.content_hash.to_hex(),
            "report": "missing values should be sentinel -9999 but are 0",
        }),
    );

    // Researcher and data scientist review the dataset and its operation
    // history through the accountability query.
    let account = researcher.lineage(FIG4_UUID, 2, "account")?;
    let reviewers = account.as_array().map(Vec::len).unwrap_or(0);
    rec.record(
        "Researcher R",
        "review_history_with_data_scientist",
        json!({"history_entries": reviewers}),
    );

    // Data scientist publishes the corrected dataset with the explanation.
    let v3_bytes = replay_ops::apply_cell_edits(&v2_bytes, "2:1:-9999")?;
    let fix_repo = dir.join("repo-fix");
    write_artifact(
        &fix_repo,
        "reanalysis.csv",
        &v3_bytes,
        &json!({
            "uuid": FIG4_UUID,
            "licence": "CC-BY",
            "summary": "corrected publication subset",
            "data_paths": ["repo://institute/reanalysis-v3.csv"],
            "dependencies": [{"uuid": FIG4_UUID, "version": 2}],
            "operations": [
                {"op_kind": "CORRECTION", "parameters": {"edits": "2:1:-9999"}}
            ],
            "change_note": "set missing values to sentinel -9999 after external report",
        }),
    )?;
    let report = scan_once(&scientist, &fix_repo, project, 2024);
    if report.registered != 1 {
        return Err(Error::new(ErrorCode::BadArgs, format!("{report:?}")));
    }
    rec.record("Data Scientist D", "publish_corrected_version", json!(report));

    // Closing check: accountability over the corrected version names both
    // the researcher and the data scientist.
    let account = scientist.lineage(FIG4_UUID, 3, "account")?;
    let actors: std::collections::BTreeSet<String> = account
        .as_array()
        .map(|entries| {
            entries
                .iter()
                .filter_map(|e| e["identity"]["display_name"].as_str())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    if actors.len() < 2 {
        return Err(Error::new(
            ErrorCode::UnresolvedActor,
            format!("expected at least two identities, got {actors:?}"),
        ));
    }
    rec.record(
        "Data Scientist D",
        "final_accountability",
        json!({"identities": actors}),
    );
    Ok(())
}
