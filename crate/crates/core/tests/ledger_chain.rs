//! Ledger behavior: packing, nonces, hash chain, persistence and recovery.

use std::sync::Arc;

use databom_core::calls;
use databom_core::contracts::identity::RegisterIdentityArgs;
use databom_core::crypto::KeyPair;
use databom_core::ledger::replay_from_log;
use databom_core::runtime::identity_registry_address;
use databom_core::tx::{CallEnvelope, ReceiptStatus, SignedTransaction, TxTarget};
use databom_core::{ChainConfig, ErrorCode, Node};
use tempfile::TempDir;

fn test_config(dir: &TempDir) -> ChainConfig {
    let mut cfg = ChainConfig::new(dir.path().join("chain.log"));
    cfg.chain_id = "ledger-tests".to_string();
    cfg
}

fn register_tx(node: &Node, pair: &KeyPair, name: &str) -> SignedTransaction {
    let args = RegisterIdentityArgs {
        address: pair.address(),
        public_key: hex::encode(pair.public_key_bytes()),
        display_name: name.to_string(),
        organisation: "Org".to_string(),
        service_endpoint: format!("https://{name}.example"),
    };
    SignedTransaction::create(
        pair,
        node.chain_id(),
        node.next_nonce(&pair.address()),
        TxTarget::Contract(identity_registry_address()),
        calls::register_identity(&args).unwrap().encode().unwrap(),
    )
    .unwrap()
}

/// Transaction with a payload padded to roughly the requested size; the call
/// reverts but still occupies block space and consumes its nonce.
fn padded_tx(node: &Node, pair: &KeyPair, nonce: u64, payload_target: usize) -> SignedTransaction {
    let padding = "x".repeat(payload_target);
    let envelope = CallEnvelope::new("register_identity", vec![serde_json::json!(padding)]);
    SignedTransaction::create(
        pair,
        node.chain_id(),
        nonce,
        TxTarget::Contract(identity_registry_address()),
        envelope.encode().unwrap(),
    )
    .unwrap()
}

#[test]
fn submitted_tx_lands_in_a_block_with_receipt() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let hash = node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
    assert_eq!(hash.as_bytes().len(), 32);

    let block = node.produce_block().unwrap();
    assert_eq!(block.height, 1);
    assert_eq!(block.transactions.len(), 1);
    let receipt = node.receipt(&hash).unwrap();
    assert_eq!(receipt.status, ReceiptStatus::Success);
    assert_eq!(receipt.block_height, 1);
}

#[test]
fn nonce_gap_is_rejected() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let mut tx = register_tx(&node, &alice, "alice");
    tx = SignedTransaction::create(
        &alice,
        node.chain_id(),
        5,
        tx.target,
        tx.payload.clone(),
    )
    .unwrap();
    let err = node.submit_transaction(tx).unwrap_err();
    assert_eq!(err.code, ErrorCode::BadNonce);
}

#[test]
fn bad_signature_is_rejected() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let mut tx = register_tx(&node, &alice, "alice");
    tx.signature[0] ^= 0xff;
    let err = node.submit_transaction(tx).unwrap_err();
    assert_eq!(err.code, ErrorCode::BadSignature);
}

#[test]
fn oversized_payload_is_rejected_at_the_boundary() {
    let dir = TempDir::new().unwrap();
    let mut cfg = test_config(&dir);
    cfg.block_budget_bytes = 4096;
    let node = Node::open(cfg).unwrap();
    let alice = KeyPair::from_seed(b"alice");

    // A payload of budget+1 bytes cannot fit regardless of envelope overhead.
    let tx = padded_tx(&node, &alice, 0, 4097);
    let err = node.submit_transaction(tx).unwrap_err();
    assert_eq!(err.code, ErrorCode::OversizedTx);
}

#[test]
fn greedy_packing_defers_what_does_not_fit() {
    let dir = TempDir::new().unwrap();
    let mut cfg = test_config(&dir);
    cfg.block_budget_bytes = usize::MAX;
    // Measure the serialized size of one padded transaction, then configure
    // the budget so exactly two fit (the 40 KB / 100 KB example).
    let probe_dir = TempDir::new().unwrap();
    let probe_node = Node::open(test_config(&probe_dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let tx_size = padded_tx(&probe_node, &alice, 0, 40_000).size_bytes();

    let mut cfg2 = test_config(&dir);
    cfg2.block_budget_bytes = tx_size * 5 / 2;
    let node = Node::open(cfg2).unwrap();
    for nonce in 0..3 {
        node.submit_transaction(padded_tx(&node, &alice, nonce, 40_000)).unwrap();
    }
    let block = node.produce_block().unwrap();
    assert_eq!(block.transactions.len(), 2);
    assert_eq!(node.mempool_len(), 1);
    let next = node.produce_block().unwrap();
    assert_eq!(next.transactions.len(), 1);
}

#[test]
fn packing_matches_independent_greedy_oracle() {
    // Oracle: simulate FIFO greedy packing over the measured sizes and
    // predict how many blocks 20 creation-sized transactions need.
    let dir = TempDir::new().unwrap();
    let probe = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let sizes: Vec<usize> = (0..20u64)
        .map(|n| padded_tx(&probe, &alice, n, 7_000).size_bytes())
        .collect();
    let budget = 24_000usize;

    let mut oracle_blocks = 0usize;
    let mut remaining: &[usize] = &sizes;
    while !remaining.is_empty() {
        let mut used = 0;
        let mut taken = 0;
        for s in remaining {
            if used + s > budget {
                break;
            }
            used += s;
            taken += 1;
        }
        assert!(taken > 0, "every tx fits an empty block");
        remaining = &remaining[taken..];
        oracle_blocks += 1;
    }

    let dir2 = TempDir::new().unwrap();
    let mut cfg = test_config(&dir2);
    cfg.block_budget_bytes = budget;
    let node = Node::open(cfg).unwrap();
    for nonce in 0..20u64 {
        node.submit_transaction(padded_tx(&node, &alice, nonce, 7_000)).unwrap();
    }
    let mut produced = 0usize;
    while node.mempool_len() > 0 {
        let block = node.produce_block().unwrap();
        assert!(block.total_tx_bytes() <= budget);
        produced += 1;
    }
    assert_eq!(produced, oracle_blocks);
}

#[test]
fn empty_mempool_produces_empty_block_with_same_root() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let root_before = node.state_root();
    let block = node.produce_block().unwrap();
    assert_eq!(block.transactions.len(), 0);
    assert_eq!(block.state_root, root_before);
}

#[test]
fn hash_chain_links_every_block() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
    node.produce_block().unwrap();
    node.produce_block().unwrap();
    node.produce_block().unwrap();

    for h in 1..=node.height() {
        let parent = node.block(h - 1).unwrap();
        let block = node.block(h).unwrap();
        assert_eq!(block.parent_hash, parent.block_hash);
        assert_eq!(block.compute_hash().unwrap(), block.block_hash);
    }
}

#[test]
fn identical_schedules_give_identical_chains() {
    let run = || {
        let dir = TempDir::new().unwrap();
        let node = Node::open(test_config(&dir)).unwrap();
        let alice = KeyPair::from_seed(b"alice");
        let bob = KeyPair::from_seed(b"bob");
        node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
        node.submit_transaction(register_tx(&node, &bob, "bob")).unwrap();
        node.produce_block().unwrap();
        node.submit_transaction(padded_tx(&node, &alice, 1, 500)).unwrap();
        node.produce_block().unwrap();
        let hashes: Vec<_> = (0..=node.height()).map(|h| node.block(h).unwrap().block_hash).collect();
        let roots: Vec<_> = (0..=node.height()).map(|h| node.block(h).unwrap().state_root).collect();
        (hashes, roots)
    };
    assert_eq!(run(), run());
}

#[test]
fn nonces_are_contiguous_even_across_reverts() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
    // nonce 1 reverts (bad args) but still consumes the nonce
    node.submit_transaction(padded_tx(&node, &alice, 1, 100)).unwrap();
    node.produce_block().unwrap();
    assert_eq!(node.next_nonce(&alice.address()), 2);

    let mut included: Vec<u64> = (1..=node.height())
        .flat_map(|h| node.block(h).unwrap().transactions)
        .filter(|tx| tx.sender == alice.address())
        .map(|tx| tx.nonce)
        .collect();
    included.sort();
    assert_eq!(included, vec![0, 1]);
}

#[test]
fn replay_reconstructs_identical_state_root() {
    let dir = TempDir::new().unwrap();
    let cfg = test_config(&dir);
    let (root, height) = {
        let node = Node::open(cfg.clone()).unwrap();
        let alice = KeyPair::from_seed(b"alice");
        let bob = KeyPair::from_seed(b"bob");
        node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
        node.produce_block().unwrap();
        node.submit_transaction(register_tx(&node, &bob, "bob")).unwrap();
        node.produce_block().unwrap();
        node.produce_block().unwrap();
        (node.state_root(), node.height())
    };

    let replayed = replay_from_log(&cfg.log_path).unwrap();
    assert_eq!(replayed.height(), height);
    assert_eq!(replayed.state_root(), root);

    // Node::open over an existing log resumes from the same state.
    let reopened = Node::open(cfg).unwrap();
    assert_eq!(reopened.state_root(), root);
    assert_eq!(reopened.height(), height);
}

#[test]
fn genesis_only_log_replays_to_height_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = test_config(&dir);
    drop(Node::open(cfg.clone()).unwrap());
    let replayed = replay_from_log(&cfg.log_path).unwrap();
    assert_eq!(replayed.height(), 0);
}

#[test]
fn flipped_byte_in_block_body_is_detected_with_height() {
    let dir = TempDir::new().unwrap();
    let cfg = test_config(&dir);
    {
        let node = Node::open(cfg.clone()).unwrap();
        let alice = KeyPair::from_seed(b"alice");
        let bob = KeyPair::from_seed(b"bob");
        let carol = KeyPair::from_seed(b"carol");
        for (pair, name) in [(&alice, "alice"), (&bob, "bob"), (&carol, "carol")] {
            node.submit_transaction(register_tx(&node, pair, name)).unwrap();
            node.produce_block().unwrap();
        }
    }

    // Flip one byte inside the line for block 3.
    let mut data = std::fs::read(&cfg.log_path).unwrap();
    let lines: Vec<&[u8]> = data.split(|b| *b == b'\n').collect();
    let offset: usize = lines[..3].iter().map(|l| l.len() + 1).sum();
    let target = offset + lines[3].len() / 2;
    data[target] ^= 0x01;
    std::fs::write(&cfg.log_path, &data).unwrap();

    let err = replay_from_log(&cfg.log_path).unwrap_err();
    assert_eq!(err.code, ErrorCode::CorruptLog);
    assert!(err.message.contains("height 3"), "got: {}", err.message);
}

#[test]
fn concurrent_reads_match_sequential_reads() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    node.submit_transaction(register_tx(&node, &alice, "alice")).unwrap();
    node.produce_block().unwrap();

    let payload = calls::resolve_identity(alice.address()).encode().unwrap();
    let sequential: Vec<Vec<u8>> = (0..1000)
        .map(|_| node.call_readonly(identity_registry_address(), &payload).unwrap())
        .collect();

    let root_before = node.state_root();
    let node2: Arc<Node> = Arc::clone(&node);
    let mut handles = Vec::new();
    for _ in 0..4 {
        let node = Arc::clone(&node2);
        let payload = payload.clone();
        handles.push(std::thread::spawn(move || {
            (0..250)
                .map(|_| node.call_readonly(identity_registry_address(), &payload).unwrap())
                .collect::<Vec<Vec<u8>>>()
        }));
    }
    let mut concurrent = Vec::new();
    for handle in handles {
        concurrent.extend(handle.join().unwrap());
    }
    assert_eq!(concurrent.len(), sequential.len());
    for result in &concurrent {
        assert_eq!(result, &sequential[0]);
    }
    // Read purity: state root untouched by 2000 reads.
    assert_eq!(node.state_root(), root_before);
}

#[test]
fn readonly_call_on_fresh_registry_is_empty() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let payload = calls::list_identities().encode().unwrap();
    let result = node.call_readonly(identity_registry_address(), &payload).unwrap();
    assert_eq!(result, b"[]".to_vec());
}

#[test]
fn raw_deploy_transactions_revert() {
    let dir = TempDir::new().unwrap();
    let node = Node::open(test_config(&dir)).unwrap();
    let alice = KeyPair::from_seed(b"alice");
    let deploy = databom_core::tx::DeployEnvelope {
        kind: databom_core::runtime::ContractKind::DatabomRegistry,
        init_args: serde_json::json!({}),
    };
    let tx = SignedTransaction::create(
        &alice,
        node.chain_id(),
        0,
        TxTarget::Deploy,
        deploy.encode().unwrap(),
    )
    .unwrap();
    let hash = node.submit_transaction(tx).unwrap();
    node.produce_block().unwrap();
    let receipt = node.receipt(&hash).unwrap();
    assert_eq!(receipt.status, ReceiptStatus::Reverted);
    assert_eq!(receipt.error_code, Some(ErrorCode::BadInitArgs));
}
