#![forbid(unsafe_code)]

//! JSON-over-HTTP gateway for the DataBOM platform.
//!
//! Exposes identity services, DataBOM services (deploy, create, update,
//! retrieve, authorise) and lineage queries over the embedded ledger.
//! Mutating requests are signed with per-stakeholder key files held by the
//! gateway; `?wait=true` awaits inclusion and returns the receipt.

pub mod app;
pub mod config;
pub mod keys;
pub mod scenario;

pub use app::{build_router, AppState};
pub use config::GatewayConfig;
pub use keys::KeyStore;
pub use scenario::{run_scenario, Transcript};

use std::net::SocketAddr;
use std::sync::Arc;

use databom_core::error::{Error, ErrorCode, Result};

/// Binds a listener and serves the API until the task is aborted.
/// Returns the bound address and the join handle.
pub async fn spawn_server(state: AppState) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(state.listen_addr)
        .await
        .map_err(|e| {
            Error::new(
                ErrorCode::Io,
                format!("cannot bind {}: {e}", state.listen_addr),
            )
        })?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::new(ErrorCode::Io, e.to_string()))?;
    let router = build_router(state);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok((addr, handle))
}

/// Everything a running platform instance owns: node, producer, server.
pub struct RunningPlatform {
    pub node: Arc<databom_core::Node>,
    pub addr: SocketAddr,
    pub keys: Arc<KeyStore>,
    producer: Option<databom_core::ledger::ProducerHandle>,
    server: tokio::task::JoinHandle<()>,
}

impl RunningPlatform {
    /// Starts node + producer + gateway on an OS-assigned port.
    pub async fn start(
        chain_config: databom_core::ChainConfig,
        key_dir: &std::path::Path,
        matrix: databom_core::lineage::LicenceMatrix,
    ) -> Result<RunningPlatform> {
        let node = databom_core::Node::open(chain_config)?;
        let producer = node.start_producer();
        let keys = Arc::new(KeyStore::open(key_dir)?);
        let state = AppState::new(
            Arc::clone(&node),
            Arc::clone(&keys),
            matrix,
            "127.0.0.1:0".parse().expect("valid loopback address"),
        );
        let (addr, server) = spawn_server(state).await?;
        Ok(RunningPlatform {
            node,
            addr,
            keys,
            producer: Some(producer),
            server,
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.server.abort();
        self.producer.take();
    }
}
