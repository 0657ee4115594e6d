#![forbid(unsafe_code)]

//! Core of the DataBOM platform: a deterministic simulated blockchain hosting
//! the identity, factory and DataBOM registry state machines, plus the
//! off-chain lineage query engine.
//!
//! The ledger is a single-writer, append-only chain of hash-linked blocks.
//! Contract "code" is native Rust handlers dispatched by method name; all
//! contract state serializes to canonical (key-sorted, compact) JSON so that
//! state roots are reproducible across runs and after crash recovery.

pub mod block;
pub mod calls;
pub mod canonical;
pub mod config;
pub mod contracts;
pub mod crypto;
pub mod error;
pub mod ledger;
pub mod lineage;
pub mod replay_ops;
pub mod runtime;
pub mod tx;

pub use block::Block;
pub use config::ChainConfig;
pub use crypto::{Address, Hash32, KeyPair};
pub use error::{Error, ErrorCode, Result};
pub use ledger::Node;
pub use tx::{CallEnvelope, Event, Receipt, ReceiptStatus, SignedTransaction, TxTarget};
