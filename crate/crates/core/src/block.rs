//! Hash-chained blocks.

use serde::{Deserialize, Serialize};

use crate::canonical::canonical_digest;
use crate::crypto::Hash32;
use crate::error::Result;
use crate::tx::SignedTransaction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_hash: Hash32,
    pub timestamp_ms: u64,
    pub transactions: Vec<SignedTransaction>,
    pub state_root: Hash32,
    pub block_hash: Hash32,
}

/// Everything the block hash commits to (all fields except the hash itself).
#[derive(Serialize)]
struct HashView<'a> {
    height: u64,
    parent_hash: Hash32,
    timestamp_ms: u64,
    transactions: &'a [SignedTransaction],
    state_root: Hash32,
}

impl Block {
    pub fn seal(
        height: u64,
        parent_hash: Hash32,
        timestamp_ms: u64,
        transactions: Vec<SignedTransaction>,
        state_root: Hash32,
    ) -> Result<Block> {
        let block_hash = canonical_digest(&HashView {
            height,
            parent_hash,
            timestamp_ms,
            transactions: &transactions,
            state_root,
        })?;
        Ok(Block {
            height,
            parent_hash,
            timestamp_ms,
            transactions,
            state_root,
            block_hash,
        })
    }

    /// Recomputes the hash from the block contents (tamper check).
    pub fn compute_hash(&self) -> Result<Hash32> {
        canonical_digest(&HashView {
            height: self.height,
            parent_hash: self.parent_hash,
            timestamp_ms: self.timestamp_ms,
            transactions: &self.transactions,
            state_root: self.state_root,
        })
    }

    pub fn total_tx_bytes(&self) -> usize {
        self.transactions.iter().map(|tx| tx.size_bytes()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sealed_hash_matches_recomputation() {
        let block = Block::seal(0, Hash32::ZERO, 1_000, vec![], Hash32::of(b"root")).unwrap();
        assert_eq!(block.block_hash, block.compute_hash().unwrap());
    }

    #[test]
    fn any_field_change_breaks_hash() {
        let block = Block::seal(1, Hash32::of(b"p"), 1_500, vec![], Hash32::of(b"r")).unwrap();
        let mut tampered = block.clone();
        tampered.timestamp_ms += 1;
        assert_ne!(tampered.compute_hash().unwrap(), block.block_hash);
    }
}
