//! Batch scanning: walk an artifact tree, classify each artifact against the
//! registry and register what changed. One bad artifact never aborts the
//! batch.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use databom_core::error::{Error, ErrorCode, Result};

use crate::client::{CreateDatasetRequest, GatewayClient};
use crate::metadata::{extract_metadata, is_artifact, ArtifactMetadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    NewDataset,
    NewVersion,
    Unchanged,
}

/// What the generator did for one artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Registered {
        classification: Classification,
        uuid: String,
        version: u32,
    },
    Skipped {
        uuid: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedItem {
    pub path: PathBuf,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScanReport {
    pub registered: usize,
    pub skipped: usize,
    pub failed: Vec<FailedItem>,
}

/// NEW_DATASET iff the uuid is unknown; NEW_VERSION iff it is known and the
/// content hash differs from the latest version; UNCHANGED otherwise.
pub fn classify_change(meta: &ArtifactMetadata, client: &GatewayClient) -> Result<Classification> {
    match client.latest_version(&meta.uuid) {
        Ok(latest) => {
            if latest.content_hash == meta.content_hash.to_hex() {
                Ok(Classification::Unchanged)
            } else {
                Ok(Classification::NewVersion)
            }
        }
        Err(e) if e.code == ErrorCode::NoSuchDataset => Ok(Classification::NewDataset),
        Err(e) => Err(e),
    }
}

/// Extracts, classifies and (when needed) registers one artifact.
pub fn process_artifact(
    client: &GatewayClient,
    artifact: &Path,
    project_id: &str,
    year: u16,
) -> Result<Decision> {
    let meta = extract_metadata(artifact)?;
    match classify_change(&meta, client)? {
        Classification::Unchanged => Ok(Decision::Skipped {
            uuid: meta.uuid.clone(),
        }),
        Classification::NewDataset => {
            let outcome = client.create_dataset(&CreateDatasetRequest {
                project_id: project_id.to_string(),
                year,
                uuid: meta.uuid.clone(),
                file_name: meta.file_name.clone(),
                version: meta.version_input(),
            })?;
            check_receipt(&outcome.receipt)?;
            Ok(Decision::Registered {
                classification: Classification::NewDataset,
                uuid: meta.uuid,
                version: 1,
            })
        }
        Classification::NewVersion => {
            let outcome = client.add_version(&meta.uuid, meta.version_input())?;
            check_receipt(&outcome.receipt)?;
            Ok(Decision::Registered {
                classification: Classification::NewVersion,
                uuid: meta.uuid,
                version: outcome.version.unwrap_or(0),
            })
        }
    }
}

fn check_receipt(receipt: &Option<databom_core::tx::Receipt>) -> Result<()> {
    match receipt {
        Some(r) if r.status == databom_core::tx::ReceiptStatus::Reverted => Err(Error::new(
            r.error_code.unwrap_or(ErrorCode::BadArgs),
            r.revert_reason.clone().unwrap_or_else(|| "reverted".into()),
        )),
        _ => Ok(()),
    }
}

/// Collects artifact files under `root` in deterministic path order.
pub fn collect_artifacts(root: &Path) -> Vec<PathBuf> {
    let mut artifacts: Vec<PathBuf> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.file_type().is_file())
        .map(|entry| entry.into_path())
        .filter(|path| is_artifact(path))
        .collect();
    artifacts.sort();
    artifacts
}

/// Processes every artifact under `root` exactly once. Per-item failures
/// land in the report; the batch always completes.
pub fn scan_once(
    client: &GatewayClient,
    root: &Path,
    project_id: &str,
    year: u16,
) -> ScanReport {
    let mut report = ScanReport::default();
    for artifact in collect_artifacts(root) {
        match process_artifact(client, &artifact, project_id, year) {
            Ok(Decision::Registered {
                classification,
                uuid,
                version,
            }) => {
                log::info!(
                    "{}: {:?} registered as ({uuid}, {version})",
                    artifact.display(),
                    classification
                );
                report.registered += 1;
            }
            Ok(Decision::Skipped { uuid }) => {
                log::info!("{}: UNCHANGED ({uuid})", artifact.display());
                report.skipped += 1;
            }
            Err(e) => {
                log::warn!("{}: failed: {e}", artifact.display());
                report.failed.push(FailedItem {
                    path: artifact,
                    code: e.code,
                    message: e.message,
                });
            }
        }
    }
    report
}
