//! Chain configuration, loadable from a JSON file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};

pub const DEFAULT_BLOCK_BUDGET_BYTES: usize = 131_072;
pub const DEFAULT_BLOCK_INTERVAL_MS: u64 = 500;
/// Fixed logical genesis time; block timestamps derive from it so that a
/// replayed transaction sequence yields identical block hashes.
pub const DEFAULT_GENESIS_TIMESTAMP_MS: u64 = 1_735_689_600_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainConfig {
    #[serde(default = "default_chain_id")]
    pub chain_id: String,
    #[serde(default = "default_budget")]
    pub block_budget_bytes: usize,
    #[serde(default = "default_interval")]
    pub block_interval_ms: u64,
    pub log_path: PathBuf,
    /// When false the producer skips ticks with an empty mempool, keeping
    /// block heights a pure function of the transaction sequence.
    #[serde(default = "default_true")]
    pub produce_empty_blocks: bool,
    #[serde(default = "default_genesis_ts")]
    pub genesis_timestamp_ms: u64,
}

fn default_chain_id() -> String {
    "databom-local".to_string()
}
fn default_budget() -> usize {
    DEFAULT_BLOCK_BUDGET_BYTES
}
fn default_interval() -> u64 {
    DEFAULT_BLOCK_INTERVAL_MS
}
fn default_true() -> bool {
    true
}
fn default_genesis_ts() -> u64 {
    DEFAULT_GENESIS_TIMESTAMP_MS
}

impl ChainConfig {
    pub fn new(log_path: impl Into<PathBuf>) -> ChainConfig {
        ChainConfig {
            chain_id: default_chain_id(),
            block_budget_bytes: default_budget(),
            block_interval_ms: default_interval(),
            log_path: log_path.into(),
            produce_empty_blocks: true,
            genesis_timestamp_ms: default_genesis_ts(),
        }
    }

    pub fn load(path: &Path) -> Result<ChainConfig> {
        let data = std::fs::read(path)?;
        serde_json::from_slice(&data).map_err(|e| {
            Error::new(
                ErrorCode::BadArgs,
                format!("bad chain config {}: {e}", path.display()),
            )
        })
    }

    /// Logical timestamp for a block at the given height.
    pub fn block_timestamp_ms(&self, height: u64) -> u64 {
        self.genesis_timestamp_ms + height * self.block_interval_ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg: ChainConfig = serde_json::from_str(r#"{"log_path": "/tmp/chain.log"}"#).unwrap();
        assert_eq!(cfg.block_budget_bytes, DEFAULT_BLOCK_BUDGET_BYTES);
        assert_eq!(cfg.block_interval_ms, DEFAULT_BLOCK_INTERVAL_MS);
        assert_eq!(cfg.chain_id, "databom-local");
        assert!(cfg.produce_empty_blocks);
    }

    #[test]
    fn block_timestamps_are_deterministic() {
        let cfg = ChainConfig::new("/tmp/x.log");
        assert_eq!(cfg.block_timestamp_ms(0), cfg.genesis_timestamp_ms);
        assert_eq!(
            cfg.block_timestamp_ms(3),
            cfg.genesis_timestamp_ms + 3 * cfg.block_interval_ms
        );
    }
}
