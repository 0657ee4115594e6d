//! Continuous mode: a filesystem watcher with debounce.
//!
//! Raw create/modify events are keyed by artifact path (sidecar events map
//! back to their artifact); a path is processed once it has been quiet for
//! the debounce window, so half-written files never register.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use notify::{Event, EventKind, RecursiveMode, Watcher};

use databom_core::error::{Error, ErrorCode, Result};

use crate::client::GatewayClient;
use crate::metadata::SIDECAR_SUFFIX;
use crate::scan::{process_artifact, Decision};

pub const DEFAULT_DEBOUNCE_MS: u64 = 500;

/// Maps a filesystem event path to the artifact it concerns.
fn artifact_for(path: &Path) -> PathBuf {
    match path.to_str() {
        Some(s) if s.ends_with(SIDECAR_SUFFIX) => {
            PathBuf::from(&s[..s.len() - SIDECAR_SUFFIX.len()])
        }
        _ => path.to_path_buf(),
    }
}

fn is_relevant(kind: &EventKind) -> bool {
    matches!(kind, EventKind::Create(_) | EventKind::Modify(_))
}

/// Watches `root` and registers changed artifacts until `stop` returns true
/// (tests) or forever (CLI). One log line per decision.
pub fn watch_with_stop(
    client: &GatewayClient,
    root: &Path,
    debounce_ms: u64,
    project_id: &str,
    year: u16,
    stop: impl Fn() -> bool,
) -> Result<()> {
    let (tx, rx) = mpsc::channel::<PathBuf>();
    let mut watcher = notify::recommended_watcher(move |event: notify::Result<Event>| {
        if let Ok(event) = event {
            if is_relevant(&event.kind) {
                for path in event.paths {
                    let _ = tx.send(path);
                }
            }
        }
    })
    .map_err(|e| Error::new(ErrorCode::Io, format!("watcher setup failed: {e}")))?;
    watcher
        .watch(root, RecursiveMode::Recursive)
        .map_err(|e| Error::new(ErrorCode::Io, format!("cannot watch {}: {e}", root.display())))?;
    log::info!(
        "watching {} (debounce {debounce_ms} ms, project {project_id}, year {year})",
        root.display()
    );

    let debounce = Duration::from_millis(debounce_ms);
    let mut pending: HashMap<PathBuf, Instant> = HashMap::new();
    loop {
        if stop() && pending.is_empty() {
            return Ok(());
        }
        // Absorb new events, restarting the quiet timer per artifact.
        while let Ok(path) = rx.recv_timeout(Duration::from_millis(25)) {
            let artifact = artifact_for(&path);
            if artifact.file_name().is_some() {
                pending.insert(artifact, Instant::now());
            }
        }
        // Process artifacts whose debounce window has elapsed.
        let now = Instant::now();
        let ready: Vec<PathBuf> = pending
            .iter()
            .filter(|(_, last)| now.duration_since(**last) >= debounce)
            .map(|(path, _)| path.clone())
            .collect();
        for path in ready {
            pending.remove(&path);
            if !path.exists() || !crate::metadata::is_artifact(&path) {
                continue;
            }
            match process_artifact(client, &path, project_id, year) {
                Ok(Decision::Registered {
                    classification,
                    uuid,
                    version,
                }) => log::info!(
                    "{}: {:?} registered as ({uuid}, {version})",
                    path.display(),
                    classification
                ),
                Ok(Decision::Skipped { uuid }) => {
                    log::info!("{}: UNCHANGED ({uuid})", path.display())
                }
                Err(e) => log::warn!("{}: failed: {e}", path.display()),
            }
        }
    }
}

pub fn watch(
    client: &GatewayClient,
    root: &Path,
    debounce_ms: u64,
    project_id: &str,
    year: u16,
) -> Result<()> {
    watch_with_stop(client, root, debounce_ms, project_id, year, || false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_events_map_to_their_artifact() {
        assert_eq!(
            artifact_for(Path::new("/data/obs.csv.databom.json")),
            PathBuf::from("/data/obs.csv")
        );
        assert_eq!(
            artifact_for(Path::new("/data/obs.csv")),
            PathBuf::from("/data/obs.csv")
        );
    }
}
