#![forbid(unsafe_code)]

//! DataBOM generator: extracts metadata from artifact files (JSON sidecars,
//! with an embedded-header fallback for delimited text), classifies changes
//! against the registry and registers records through the gateway. Never
//! writes to the ledger directly.

pub mod client;
pub mod metadata;
pub mod scan;
pub mod watch;

pub use client::GatewayClient;
pub use metadata::{extract_metadata, ArtifactMetadata, SidecarDocument};
pub use scan::{classify_change, process_artifact, scan_once, Classification, Decision, ScanReport};
