//! Artifact metadata extraction.
//!
//! Metadata comes from a `<artifact>.databom.json` sidecar; delimited-text
//! artifacts may instead (or additionally) embed a one-line JSON header in
//! their leading comment block:
//!
//! ```text
//! # databom: {"uuid": "...", "licence": "CC0"}
//! ```
//!
//! When both are present the merge is field-wise and the sidecar wins.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use databom_core::contracts::registry::{DependencyRef, OperationInput, VersionInput};
use databom_core::crypto::{sha256, Hash32};
use databom_core::error::{Error, ErrorCode, Result};

pub const SIDECAR_SUFFIX: &str = ".databom.json";
const HEADER_MARKER: &str = "databom:";
const DELIMITED_EXTENSIONS: [&str; 4] = ["csv", "tsv", "txt", "dat"];

/// Companion metadata document (sidecar or embedded header).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SidecarDocument {
    #[serde(default)]
    pub uuid: Option<String>,
    #[serde(default)]
    pub licence: Option<String>,
    #[serde(default)]
    pub summary: Option<String>,
    #[serde(default)]
    pub dependencies: Option<Vec<DependencyRef>>,
    #[serde(default)]
    pub operations: Option<Vec<OperationInput>>,
    #[serde(default)]
    pub attributes: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub change_note: Option<String>,
    /// Explicit repository paths or DOIs; when absent the generator records
    /// the artifact's `file://` location.
    #[serde(default)]
    pub data_paths: Option<Vec<String>>,
}

impl SidecarDocument {
    /// Field-wise merge; `self` (the sidecar) wins over `fallback`.
    fn merged_over(self, fallback: SidecarDocument) -> SidecarDocument {
        SidecarDocument {
            uuid: self.uuid.or(fallback.uuid),
            licence: self.licence.or(fallback.licence),
            summary: self.summary.or(fallback.summary),
            dependencies: self.dependencies.or(fallback.dependencies),
            operations: self.operations.or(fallback.operations),
            attributes: self.attributes.or(fallback.attributes),
            change_note: self.change_note.or(fallback.change_note),
            data_paths: self.data_paths.or(fallback.data_paths),
        }
    }

    fn is_empty(&self) -> bool {
        self.uuid.is_none()
            && self.licence.is_none()
            && self.summary.is_none()
            && self.dependencies.is_none()
            && self.operations.is_none()
            && self.attributes.is_none()
            && self.change_note.is_none()
            && self.data_paths.is_none()
    }
}

/// Extracted, merge-resolved metadata for one artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub uuid: String,
    pub file_name: String,
    pub licence: String,
    pub summary: String,
    pub content_hash: Hash32,
    pub declared_dependencies: Vec<DependencyRef>,
    pub declared_operations: Vec<OperationInput>,
    pub attributes: BTreeMap<String, String>,
    pub change_note: String,
    /// URIs of the artifact's repository locations (or DOIs).
    pub data_paths: Vec<String>,
}

impl ArtifactMetadata {
    /// The registry-facing version payload for this artifact.
    pub fn version_input(&self) -> VersionInput {
        VersionInput {
            licence: self.licence.clone(),
            summary: self.summary.clone(),
            content_hash: Some(self.content_hash),
            dependencies: self.declared_dependencies.clone(),
            data_paths: self.data_paths.clone(),
            operations: self.declared_operations.clone(),
            attributes: self.attributes.clone(),
            change_note: self.change_note.clone(),
        }
    }
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(SIDECAR_SUFFIX);
    artifact.with_file_name(name)
}

/// True for files the generator treats as registrable artifacts: anything
/// with a sidecar, or delimited text carrying an embedded header.
pub fn is_artifact(path: &Path) -> bool {
    if path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(SIDECAR_SUFFIX))
    {
        return false;
    }
    if sidecar_path(path).exists() {
        return true;
    }
    read_embedded_header(path).ok().flatten().is_some()
}

fn malformed(path: &Path, detail: impl AsRef<str>) -> Error {
    Error::new(
        ErrorCode::MalformedSidecar,
        format!("{}: {}", path.display(), detail.as_ref()),
    )
}

fn parse_document(path: &Path, bytes: &[u8]) -> Result<SidecarDocument> {
    serde_json::from_slice(bytes).map_err(|e| {
        malformed(
            path,
            format!("line {}, column {}: {e}", e.line(), e.column()),
        )
    })
}

fn is_delimited_text(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| DELIMITED_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Scans the leading comment block of a delimited-text artifact for a
/// `# databom: {...}` line.
fn read_embedded_header(path: &Path) -> Result<Option<SidecarDocument>> {
    if !is_delimited_text(path) {
        return Ok(None);
    }
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(_) => return Ok(None), // non-UTF-8 content cannot embed a header
    };
    for line in text.lines() {
        let trimmed = line.trim_start();
        if !trimmed.starts_with('#') {
            break; // the comment block ends at the first data row
        }
        let body = trimmed.trim_start_matches('#').trim_start();
        if let Some(json) = body.strip_prefix(HEADER_MARKER) {
            let doc = parse_document(path, json.trim().as_bytes())?;
            return Ok(Some(doc));
        }
    }
    Ok(None)
}

/// Extracts merged metadata for one artifact file.
pub fn extract_metadata(artifact: &Path) -> Result<ArtifactMetadata> {
    let bytes = std::fs::read(artifact).map_err(|e| {
        Error::new(
            ErrorCode::Io,
            format!("cannot read artifact {}: {e}", artifact.display()),
        )
    })?;
    let content_hash = Hash32::from(sha256(&bytes));

    let sidecar = sidecar_path(artifact);
    let sidecar_doc = if sidecar.exists() {
        Some(parse_document(&sidecar, &std::fs::read(&sidecar)?)?)
    } else {
        None
    };
    let embedded_doc = read_embedded_header(artifact)?;
    let doc = match (sidecar_doc, embedded_doc) {
        (Some(s), Some(e)) => s.merged_over(e),
        (Some(s), None) => s,
        (None, Some(e)) => e,
        (None, None) => {
            return Err(Error::new(
                ErrorCode::NoMetadata,
                format!(
                    "{}: no {SIDECAR_SUFFIX} sidecar and no embedded header",
                    artifact.display()
                ),
            ))
        }
    };
    if doc.is_empty() {
        return Err(malformed(artifact, "metadata document is empty"));
    }
    let uuid_raw = doc
        .uuid
        .ok_or_else(|| malformed(artifact, "field uuid is mandatory"))?;
    let uuid = uuid::Uuid::parse_str(&uuid_raw)
        .map_err(|e| Error::new(ErrorCode::BadUuid, format!("bad uuid {uuid_raw:?}: {e}")))?
        .to_string();

    let file_name = artifact
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let absolute = artifact
        .canonicalize()
        .unwrap_or_else(|_| artifact.to_path_buf());
    let data_paths = doc
        .data_paths
        .unwrap_or_else(|| vec![format!("file://{}", absolute.display())]);
    Ok(ArtifactMetadata {
        uuid,
        file_name,
        licence: doc.licence.unwrap_or_default(),
        summary: doc.summary.unwrap_or_default(),
        content_hash,
        declared_dependencies: doc.dependencies.unwrap_or_default(),
        declared_operations: doc.operations.unwrap_or_default(),
        attributes: doc.attributes.unwrap_or_default(),
        change_note: doc.change_note.unwrap_or_default(),
        data_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const UUID: &str = "7b0c3d3e-8f69-4f2e-9cf1-3f44f5ec0001";

    fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn csv_with_sidecar_extracts_complete_metadata() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "obs.csv", "a,b\n1,2\n");
        write(
            &dir,
            "obs.csv.databom.json",
            &format!(r#"{{"uuid": "{UUID}", "licence": "CC0", "summary": "obs"}}"#),
        );
        let meta = extract_metadata(&artifact).unwrap();
        assert_eq!(meta.uuid, UUID);
        assert_eq!(meta.licence, "CC0");
        assert_eq!(meta.file_name, "obs.csv");
        assert_eq!(meta.content_hash, Hash32::of(b"a,b\n1,2\n"));
        assert!(meta.data_path.starts_with("file:///"));
    }

    #[test]
    fn sidecar_missing_uuid_is_malformed() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "obs.csv", "a,b\n");
        write(&dir, "obs.csv.databom.json", r#"{"licence": "CC0"}"#);
        let err = extract_metadata(&artifact).unwrap_err();
        assert_eq!(err.code, ErrorCode::MalformedSidecar);
        assert!(err.message.contains("uuid"));
    }

    #[test]
    fn broken_json_reports_line_and_column() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "obs.csv", "a,b\n");
        write(&dir, "obs.csv.databom.json", "{\n  \"uuid\": oops\n}");
        let err = extract_metadata(&artifact).unwrap_err();
        assert_eq!(err.code, ErrorCode::MalformedSidecar);
        assert!(err.message.contains("line 2"), "got: {}", err.message);
    }

    #[test]
    fn invalid_uuid_is_bad_uuid() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "obs.csv", "a,b\n");
        write(
            &dir,
            "obs.csv.databom.json",
            r#"{"uuid": "not-a-uuid", "licence": "CC0"}"#,
        );
        assert_eq!(
            extract_metadata(&artifact).unwrap_err().code,
            ErrorCode::BadUuid
        );
    }

    #[test]
    fn empty_artifact_hashes_to_the_known_sha256_of_empty_input() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "empty.csv", "");
        write(
            &dir,
            "empty.csv.databom.json",
            &format!(r#"{{"uuid": "{UUID}"}}"#),
        );
        let meta = extract_metadata(&artifact).unwrap();
        assert_eq!(
            meta.content_hash.to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn embedded_header_works_without_sidecar() {
        let dir = TempDir::new().unwrap();
        let artifact = write(
            &dir,
            "obs.csv",
            &format!("# databom: {{\"uuid\": \"{UUID}\", \"licence\": \"CC-BY\"}}\na,b\n1,2\n"),
        );
        let meta = extract_metadata(&artifact).unwrap();
        assert_eq!(meta.licence, "CC-BY");
    }

    #[test]
    fn sidecar_wins_field_wise_over_embedded_header() {
        let dir = TempDir::new().unwrap();
        let artifact = write(
            &dir,
            "obs.csv",
            &format!(
                "# databom: {{\"uuid\": \"{UUID}\", \"licence\": \"CC-BY\", \"summary\": \"from header\"}}\na,b\n"
            ),
        );
        // Sidecar overrides the licence but not the summary.
        write(
            &dir,
            "obs.csv.databom.json",
            &format!(r#"{{"uuid": "{UUID}", "licence": "CC0"}}"#),
        );
        let meta = extract_metadata(&artifact).unwrap();
        assert_eq!(meta.licence, "CC0");
        assert_eq!(meta.summary, "from header");
    }

    #[test]
    fn no_metadata_at_all_is_no_metadata() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "plain.csv", "a,b\n1,2\n");
        assert_eq!(
            extract_metadata(&artifact).unwrap_err().code,
            ErrorCode::NoMetadata
        );
    }

    #[test]
    fn artifact_detection_skips_sidecars_and_plain_files() {
        let dir = TempDir::new().unwrap();
        let artifact = write(&dir, "obs.csv", "a,b\n");
        let sidecar = write(
            &dir,
            "obs.csv.databom.json",
            &format!(r#"{{"uuid": "{UUID}"}}"#),
        );
        let plain = write(&dir, "notes.md", "# notes\n");
        assert!(is_artifact(&artifact));
        assert!(!is_artifact(&sidecar));
        assert!(!is_artifact(&plain));
    }
}
