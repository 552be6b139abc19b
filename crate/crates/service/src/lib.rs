//! HTTP front end for the workbench: suggestions, document and annotation
//! CRUD over a file-backed [`Store`], auto-tagging, agreement and both
//! evaluators.
//!
//! ```no_run
//! # async fn run() -> Result<(), cuiwb_service::ServiceError> {
//! let config = cuiwb_service::ServiceConfig {
//!     vocab: "fixtures/toy_vocab.tsv".into(),
//!     store: "store".into(),
//!     port: 8080,
//! };
//! cuiwb_service::serve(config, |addr| println!("listening on http://{addr}")).await
//! # }
//! ```

mod api;
mod error;
pub mod store;

use std::fs::File;
use std::io;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use cuiwb_core::vocabulary::{build_index, parse_vocab_file, VocabError, VocabularyIndex};
use thiserror::Error;

pub use api::router;
pub use error::ApiError;
pub use store::{Store, StoreError};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub vocab: PathBuf,
    pub store: PathBuf,
    /// Port on localhost; 0 picks a free one.
    pub port: u16,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("vocabulary {path}: {source}")]
    Vocab { path: PathBuf, source: VocabError },
    #[error("store {path}: {source}")]
    Store { path: PathBuf, source: StoreError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Shared, read-mostly state behind every handler.
pub struct AppState {
    pub store: Store,
    pub index: VocabularyIndex,
}

impl AppState {
    /// Load the vocabulary and open the store named by `config`.
    pub fn load(config: &ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let vocab_err = |source| ServiceError::Vocab {
            path: config.vocab.clone(),
            source,
        };
        let file = File::open(&config.vocab).map_err(|e| vocab_err(e.into()))?;
        let index = build_index(parse_vocab_file(file).map_err(vocab_err)?).map_err(vocab_err)?;
        let store = Store::open(&config.store, &config.vocab).map_err(|source| ServiceError::Store {
            path: config.store.clone(),
            source,
        })?;
        Ok(Arc::new(AppState { store, index }))
    }
}

/// Serve until interrupted. `on_ready` receives the bound address once the
/// listener is accepting connections.
pub async fn serve(config: ServiceConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServiceError> {
    let state = AppState::load(&config)?;
    let listener = tokio::net::TcpListener::bind((Ipv4Addr::LOCALHOST, config.port)).await?;
    on_ready(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
