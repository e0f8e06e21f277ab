//! HTTP service: the authoring pipeline and live viewing sessions over JSON, under `/api/v1`.

pub mod config;
pub mod error;
pub mod live;
pub mod routes;
pub mod store;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use tokio::sync::Mutex as AsyncMutex;
use vignette_core::catalog::Catalog;
use vignette_core::extract::Extractor;
use vignette_core::llm::Gateway;

pub use config::{ConfigError, ServiceConfig};
pub use error::{ApiError, ErrorBody};
pub use live::{Delta, LiveSession};
pub use routes::router;
pub use store::{SessionMeta, Store, StoredVignette};

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("store: {0}")]
    Store(#[from] std::io::Error),
}

/// Shared by every handler.
pub struct AppState {
    pub config: ServiceConfig,
    pub store: Store,
    pub gateway: Gateway,
    pub extractor: Arc<Extractor>,
    /// A vignette's mutations serialize on its own lock.
    vignettes: RwLock<HashMap<String, Arc<AsyncMutex<StoredVignette>>>>,
    sessions: RwLock<HashMap<String, Arc<LiveSession>>>,
}

impl AppState {
    /// Opens the store and loads every vignette in it.
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, StartError> {
        let store = Store::open(&config.store_dir)?;
        let gateway = Gateway::new(config.provider()?);
        let extractor = Arc::new(Extractor::new(gateway.clone(), Arc::new(Catalog::builtin())));
        let vignettes = store.load_vignettes()?.into_iter().map(|v| (v.id.clone(), Arc::new(AsyncMutex::new(v)))).collect();
        Ok(Arc::new(Self { config, store, gateway, extractor, vignettes: RwLock::new(vignettes), sessions: RwLock::new(HashMap::new()) }))
    }

    pub fn vignette(&self, id: &str) -> Result<Arc<AsyncMutex<StoredVignette>>, ApiError> {
        self.vignettes.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned().ok_or_else(|| ApiError::not_found("vignette", id))
    }

    pub fn vignette_ids(&self) -> Vec<String> {
        self.vignettes.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect()
    }

    fn insert_vignette(&self, v: StoredVignette) {
        self.vignettes.write().unwrap_or_else(|p| p.into_inner()).insert(v.id.clone(), Arc::new(AsyncMutex::new(v)));
    }

    pub fn session(&self, id: &str) -> Result<Arc<LiveSession>, ApiError> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    fn insert_session(&self, s: Arc<LiveSession>) {
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(s.meta.id.clone(), s);
    }
}

impl Drop for AppState {
    fn drop(&mut self) {
        for s in self.sessions.read().unwrap_or_else(|p| p.into_inner()).values() {
            s.close();
        }
    }
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}
