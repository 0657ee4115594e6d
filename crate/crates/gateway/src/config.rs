//! Gateway configuration file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use databom_core::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default = "default_listen")]
    pub listen_addr: SocketAddr,
    /// Path to the chain config JSON.
    pub ledger_config: PathBuf,
    /// Directory of stakeholder key files.
    pub key_dir: PathBuf,
    /// Optional licence matrix; the built-in default applies when absent.
    #[serde(default)]
    pub licence_matrix: Option<PathBuf>,
}

fn default_listen() -> SocketAddr {
    "127.0.0.1:8080".parse().expect("valid default address")
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<GatewayConfig> {
        let data = std::fs::read(path)?;
        serde_json::from_slice(&data).map_err(|e| {
            Error::new(
                ErrorCode::BadArgs,
                format!("bad gateway config {}: {e}", path.display()),
            )
        })
    }
}
