//! Translation server: model listing and translation over HTTP, with at most
//! `capacity` models loaded at a time.

pub mod api;
pub mod config;
pub mod manager;

use std::net::SocketAddr;
use std::sync::Arc;

use lowmt_core::backends::{Registry, RegistryError};

pub use api::{router, AppState};
pub use config::{ConfigError, ServerConfig};
pub use manager::{EventKind, ManagerEvent, ModelManager};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the registry and builds the shared state.
pub fn build_state(config: ServerConfig) -> Result<Arc<AppState>, ServerError> {
    config.validate()?;
    let registry = Registry::open(&config.registry)?;
    tracing::info!(models = registry.len(), root = %config.registry.display(), "registry opened");
    Ok(AppState::new(config, registry))
}

/// Serves until Ctrl-C. `on_ready` receives the bound address.
pub async fn serve(config: ServerConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServerError> {
    let bind = config.bind.clone();
    let state = build_state(config)?;
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .map_err(|source| ServerError::Bind { addr: bind, source })?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    on_ready(addr);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
