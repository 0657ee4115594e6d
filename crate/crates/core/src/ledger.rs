//! The simulated append-only ledger.
//!
//! Single writer: one producer drains the mempool FIFO into byte-budgeted,
//! hash-chained blocks and applies transactions through the contract runtime.
//! Readers run concurrently against the last committed snapshot. Every block
//! is persisted as one canonical JSON line, fsynced on append; recovery
//! replays the log and must land on the identical state root.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use serde_json::Value;

use crate::block::Block;
use crate::canonical::canonical_json_bytes;
use crate::config::ChainConfig;
use crate::crypto::{Address, Hash32};
use crate::error::{Error, ErrorCode, Result};
use crate::runtime::{Contracts, ExecutionContext};
use crate::tx::{CallEnvelope, DeployEnvelope, Receipt, ReceiptStatus, SignedTransaction, TxTarget};

/// Committed chain state: blocks, contract state, account nonces, receipts.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub blocks: Vec<Block>,
    pub contracts: Contracts,
    pub nonces: BTreeMap<Address, u64>,
    pub receipts: HashMap<Hash32, Receipt>,
}

impl ChainState {
    pub fn height(&self) -> u64 {
        self.blocks.last().map(|b| b.height).unwrap_or(0)
    }

    pub fn state_root(&self) -> Hash32 {
        self.blocks
            .last()
            .map(|b| b.state_root)
            .unwrap_or(Hash32::ZERO)
    }
}

struct QueuedTx {
    tx: SignedTransaction,
    size: usize,
}

#[derive(Default)]
struct Mempool {
    queue: VecDeque<QueuedTx>,
    queued_per_sender: HashMap<Address, u64>,
}

pub struct Node {
    config: ChainConfig,
    committed: RwLock<ChainState>,
    mempool: Mutex<Mempool>,
    log: Mutex<File>,
    produce_lock: Mutex<()>,
}

impl Node {
    /// Opens a node, replaying the block log when one exists, otherwise
    /// writing the genesis block.
    pub fn open(config: ChainConfig) -> Result<Arc<Node>> {
        let log_exists = config.log_path.exists()
            && std::fs::metadata(&config.log_path)?.len() > 0;
        let state = if log_exists {
            replay_from_log(&config.log_path)?
        } else {
            let contracts = Contracts::genesis();
            let state_root = contracts.state_root();
            let genesis = Block::seal(
                0,
                Hash32::ZERO,
                config.block_timestamp_ms(0),
                vec![],
                state_root,
            )?;
            if let Some(parent) = config.log_path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&config.log_path)?;
            append_block_line(&mut file, &genesis)?;
            ChainState {
                blocks: vec![genesis],
                contracts,
                nonces: BTreeMap::new(),
                receipts: HashMap::new(),
            }
        };
        let log = OpenOptions::new().append(true).open(&config.log_path)?;
        Ok(Arc::new(Node {
            config,
            committed: RwLock::new(state),
            mempool: Mutex::new(Mempool::default()),
            log: Mutex::new(log),
            produce_lock: Mutex::new(()),
        }))
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn chain_id(&self) -> &str {
        &self.config.chain_id
    }

    pub fn height(&self) -> u64 {
        self.committed.read().height()
    }

    pub fn state_root(&self) -> Hash32 {
        self.committed.read().state_root()
    }

    pub fn block(&self, height: u64) -> Option<Block> {
        self.committed.read().blocks.get(height as usize).cloned()
    }

    pub fn receipt(&self, tx_hash: &Hash32) -> Option<Receipt> {
        self.committed.read().receipts.get(tx_hash).cloned()
    }

    /// Committed nonce plus queued transactions: the nonce the next
    /// submission from this sender must carry.
    pub fn next_nonce(&self, sender: &Address) -> u64 {
        let mempool = self.mempool.lock();
        let committed = self.committed.read().nonces.get(sender).copied().unwrap_or(0);
        committed + mempool.queued_per_sender.get(sender).copied().unwrap_or(0)
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.lock().queue.len()
    }

    /// Validates and queues a transaction. Returns its hash.
    pub fn submit_transaction(&self, tx: SignedTransaction) -> Result<Hash32> {
        tx.verify(&self.config.chain_id)?;
        let size = tx.size_bytes();
        if size > self.config.block_budget_bytes {
            return Err(Error::new(
                ErrorCode::OversizedTx,
                format!(
                    "transaction is {size} bytes, block budget is {}",
                    self.config.block_budget_bytes
                ),
            ));
        }
        let mut mempool = self.mempool.lock();
        let committed = self
            .committed
            .read()
            .nonces
            .get(&tx.sender)
            .copied()
            .unwrap_or(0);
        let expected = committed + mempool.queued_per_sender.get(&tx.sender).copied().unwrap_or(0);
        if tx.nonce != expected {
            return Err(Error::new(
                ErrorCode::BadNonce,
                format!("expected nonce {expected} for {}, got {}", tx.sender, tx.nonce),
            ));
        }
        let hash = tx.hash();
        *mempool.queued_per_sender.entry(tx.sender).or_insert(0) += 1;
        mempool.queue.push_back(QueuedTx { tx, size });
        Ok(hash)
    }

    /// Produces the next block: drains the mempool FIFO, greedily packing
    /// until the next transaction would exceed the byte budget (no
    /// reordering), applies each transaction, persists and commits.
    pub fn produce_block(&self) -> Result<Block> {
        let _producer = self.produce_lock.lock();

        // Pack under the mempool lock; queued counts stay up while the
        // transactions are in flight so nonce arithmetic holds for
        // concurrent submitters.
        let packed: Vec<QueuedTx> = {
            let mut mempool = self.mempool.lock();
            let mut used = 0usize;
            let mut packed = Vec::new();
            while let Some(front) = mempool.queue.front() {
                if used + front.size > self.config.block_budget_bytes {
                    break;
                }
                used += front.size;
                packed.push(mempool.queue.pop_front().expect("front exists"));
            }
            packed
        };

        let (parent_hash, parent_root, height, mut contracts, mut nonces) = {
            let committed = self.committed.read();
            let parent = committed.blocks.last().expect("genesis always exists");
            (
                parent.block_hash,
                parent.state_root,
                parent.height + 1,
                committed.contracts.clone(),
                committed.nonces.clone(),
            )
        };
        let timestamp_ms = self.config.block_timestamp_ms(height);

        let txs: Vec<SignedTransaction> = packed.iter().map(|q| q.tx.clone()).collect();
        let receipts = apply_transactions(&mut contracts, &mut nonces, &txs, height, timestamp_ms);

        let state_root = if txs.is_empty() {
            parent_root
        } else {
            contracts.state_root()
        };
        let block = Block::seal(height, parent_hash, timestamp_ms, txs, state_root)?;

        {
            let mut log = self.log.lock();
            append_block_line(&mut log, &block)?;
        }

        {
            let mut mempool = self.mempool.lock();
            let mut committed = self.committed.write();
            for q in &packed {
                let count = mempool
                    .queued_per_sender
                    .get_mut(&q.tx.sender)
                    .expect("sender has queued count");
                *count -= 1;
                if *count == 0 {
                    mempool.queued_per_sender.remove(&q.tx.sender);
                }
            }
            committed.blocks.push(block.clone());
            committed.contracts = contracts;
            committed.nonces = nonces;
            for receipt in receipts {
                committed.receipts.insert(receipt.tx_hash, receipt);
            }
        }
        Ok(block)
    }

    /// Executes a contract read against committed state. Raw byte surface:
    /// the payload is an encoded call envelope, the result canonical JSON.
    pub fn call_readonly(&self, target: Address, payload: &[u8]) -> Result<Vec<u8>> {
        let call = CallEnvelope::decode(payload)?;
        let value = self.query(target, &call)?;
        canonical_json_bytes(&value)
    }

    /// Typed read path used by the gateway and the lineage engine.
    pub fn query(&self, target: Address, call: &CallEnvelope) -> Result<Value> {
        let committed = self.committed.read();
        committed
            .contracts
            .dispatch_readonly(target, call, committed.height())
    }

    /// Polls until the transaction is included or the timeout elapses.
    pub fn wait_for_receipt(&self, tx_hash: &Hash32, timeout: Duration) -> Result<Receipt> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(receipt) = self.receipt(tx_hash) {
                return Ok(receipt);
            }
            if Instant::now() >= deadline {
                return Err(Error::new(
                    ErrorCode::Timeout,
                    format!("transaction {tx_hash} not included within {timeout:?}"),
                ));
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    /// Spawns the single block-producer loop.
    pub fn start_producer(self: &Arc<Self>) -> ProducerHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let node = Arc::clone(self);
        let stop_flag = Arc::clone(&stop);
        let interval = Duration::from_millis(self.config.block_interval_ms);
        let thread = std::thread::spawn(move || {
            while !stop_flag.load(Ordering::Relaxed) {
                let started = Instant::now();
                let skip = !node.config.produce_empty_blocks && node.mempool_len() == 0;
                if !skip {
                    if let Err(e) = node.produce_block() {
                        eprintln!("block production failed: {e}");
                        break;
                    }
                }
                let elapsed = started.elapsed();
                if elapsed < interval {
                    std::thread::sleep(interval - elapsed);
                }
            }
        });
        ProducerHandle {
            stop,
            thread: Some(thread),
        }
    }
}

/// Stops the producer loop on drop.
pub struct ProducerHandle {
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ProducerHandle {
    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

impl Drop for ProducerHandle {
    fn drop(&mut self) {
        self.stop();
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

fn append_block_line(file: &mut File, block: &Block) -> Result<()> {
    let mut line = canonical_json_bytes(block)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

/// Applies transactions in order. Reverted transactions consume their nonce
/// but leave contract state unchanged.
fn apply_transactions(
    contracts: &mut Contracts,
    nonces: &mut BTreeMap<Address, u64>,
    txs: &[SignedTransaction],
    height: u64,
    timestamp_ms: u64,
) -> Vec<Receipt> {
    let mut receipts = Vec::with_capacity(txs.len());
    for tx in txs {
        let tx_hash = tx.hash();
        let expected = nonces.get(&tx.sender).copied().unwrap_or(0);
        if tx.nonce != expected {
            receipts.push(Receipt {
                tx_hash,
                block_height: height,
                status: ReceiptStatus::Reverted,
                revert_reason: Some(format!("expected nonce {expected}, got {}", tx.nonce)),
                error_code: Some(ErrorCode::BadNonce),
                emitted_events: vec![],
            });
            continue;
        }
        nonces.insert(tx.sender, expected + 1);

        let ctx = ExecutionContext {
            sender: tx.sender,
            tx_nonce: tx.nonce,
            block_height: height,
            block_timestamp_ms: timestamp_ms,
        };
        let outcome = match tx.target {
            TxTarget::Deploy => DeployEnvelope::decode(&tx.payload).and_then(|_| {
                Err(Error::new(
                    ErrorCode::BadInitArgs,
                    "raw deployment is not supported; deploy registries via the factory",
                ))
            }),
            TxTarget::Contract(target) => CallEnvelope::decode(&tx.payload)
                .and_then(|call| contracts.dispatch_mutating(target, &call, &ctx)),
        };
        receipts.push(match outcome {
            Ok(events) => Receipt {
                tx_hash,
                block_height: height,
                status: ReceiptStatus::Success,
                revert_reason: None,
                error_code: None,
                emitted_events: events,
            },
            Err(e) => Receipt {
                tx_hash,
                block_height: height,
                status: ReceiptStatus::Reverted,
                revert_reason: Some(e.message),
                error_code: Some(e.code),
                emitted_events: vec![],
            },
        });
    }
    receipts
}

fn corrupt(height: u64, what: impl AsRef<str>) -> Error {
    Error::new(
        ErrorCode::CorruptLog,
        format!("height {height}: {}", what.as_ref()),
    )
}

/// Rebuilds chain state from a block log, verifying the hash chain,
/// record canonicality and state-root consistency line by line.
pub fn replay_from_log(path: &Path) -> Result<ChainState> {
    let data = std::fs::read(path)?;
    let mut state = ChainState {
        blocks: Vec::new(),
        contracts: Contracts::genesis(),
        nonces: BTreeMap::new(),
        receipts: HashMap::new(),
    };
    let mut expected_height: u64 = 0;
    for line in data.split(|b| *b == b'\n') {
        if line.is_empty() {
            continue;
        }
        let block: Block = serde_json::from_slice(line)
            .map_err(|e| corrupt(expected_height, format!("unparseable record: {e}")))?;
        if block.height != expected_height {
            return Err(corrupt(
                expected_height,
                format!("record carries height {}", block.height),
            ));
        }
        // A log record must be byte-identical to the canonical serialization
        // of its content, so any single-byte edit is detectable even when it
        // round-trips through parsing.
        let reserialized = canonical_json_bytes(&block)?;
        if reserialized != line {
            return Err(corrupt(block.height, "record is not canonical"));
        }
        if block.compute_hash()? != block.block_hash {
            return Err(corrupt(block.height, "block hash mismatch"));
        }
        match state.blocks.last() {
            None => {
                if block.parent_hash != Hash32::ZERO {
                    return Err(corrupt(0, "genesis parent hash is not zero"));
                }
            }
            Some(parent) => {
                if block.parent_hash != parent.block_hash {
                    return Err(corrupt(block.height, "hash chain break"));
                }
            }
        }
        let receipts = apply_transactions(
            &mut state.contracts,
            &mut state.nonces,
            &block.transactions,
            block.height,
            block.timestamp_ms,
        );
        let recomputed_root = if block.transactions.is_empty() && block.height > 0 {
            state.blocks.last().expect("non-genesis has parent").state_root
        } else {
            state.contracts.state_root()
        };
        if recomputed_root != block.state_root {
            return Err(corrupt(block.height, "state root mismatch"));
        }
        for receipt in receipts {
            state.receipts.insert(receipt.tx_hash, receipt);
        }
        state.blocks.push(block);
        expected_height += 1;
    }
    if state.blocks.is_empty() {
        return Err(corrupt(0, "log holds no blocks"));
    }
    Ok(state)
}
