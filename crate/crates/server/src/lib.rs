//! HTTP service for the dementia-care ADL simulator: session lifecycle,
//! simulation turns, exports, analysis, and a raw model proxy.

pub mod config;
pub mod error;
mod extract;
mod routes;

use std::sync::Arc;

use adlsim_core::gateway::{ChatBackend, Credential, Gateway, LiveBackend, MockBackend, RetryPolicy};
use adlsim_core::session::{Engine, EngineConfig, EngineError};
use adlsim_core::store::{JsonlStore, StoreError};
use adlsim_core::task_plan::{PlanFileError, PlanLibrary};
use thiserror::Error;

pub use config::{ConfigError, ServerConfig};
pub use error::{ApiError, ERROR_CODES};
pub use routes::router;

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub access_token: Option<Arc<str>>,
    pub backend_label: &'static str,
    /// Scrubbed from every response body.
    pub credential: Option<Credential>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, backend_label: &'static str) -> Self {
        Self { engine, access_token: None, backend_label, credential: None }
    }

    pub fn with_access_token(mut self, token: Option<String>) -> Self {
        self.access_token = token.map(Into::into);
        self
    }

    pub fn with_credential(mut self, credential: Option<Credential>) -> Self {
        self.credential = credential;
        self
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open data directory: {0}")]
    Store(#[from] StoreError),
    #[error("cannot load task plans: {0}")]
    Plans(#[from] PlanFileError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub fn gateway_for(config: &ServerConfig) -> Gateway {
    let backend: Arc<dyn ChatBackend> = if config.mock {
        Arc::new(MockBackend)
    } else {
        if config.credential.is_none() {
            tracing::warn!("ADLSIM_API_KEY is not set; model calls will fail until it is configured or ADLSIM_MOCK=1");
        }
        Arc::new(LiveBackend::new(&config.api_base_url, config.credential.clone(), RetryPolicy::default()))
    };
    Gateway::new(backend, config.model.clone())
}

/// Opens the store and builds the engine and handler state.
pub fn build_state(config: &ServerConfig) -> Result<AppState, StartupError> {
    let store = Arc::new(JsonlStore::open(&config.data_dir)?);
    let plans = match &config.plans_file {
        Some(path) => PlanLibrary::from_file(path)?,
        None => PlanLibrary::builtin(),
    };
    let engine = Engine::builder(gateway_for(config), store)
        .config(EngineConfig { max_turns: config.max_turns, window: config.window, ..EngineConfig::default() })
        .plans(plans)
        .build()?;
    for issue in engine.load_issues() {
        tracing::warn!("skipped unreadable log line: {issue}");
    }
    let label = if config.mock { "mock" } else { "live" };
    Ok(AppState::new(Arc::new(engine), label)
        .with_access_token(config.access_token.clone())
        .with_credential(config.credential.clone()))
}
