use std::path::PathBuf;
use std::sync::Arc;

use vignette_core::llm::{HttpConfig, HttpProvider, Provider, ScriptError, ScriptedMock};

pub const PORT_ENV: &str = "VIGNETTE_PORT";
pub const STORE_ENV: &str = "VIGNETTE_STORE_DIR";
pub const TICK_MS_ENV: &str = "VIGNETTE_TICK_MS";
pub const MOCK_ENV: &str = "VIGNETTE_MOCK_SCRIPT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{var}: {message}")]
    Var { var: &'static str, message: String },
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub store_dir: PathBuf,
    /// Wall-clock length of a tick. 0 means sessions only advance through the `advance` route.
    pub tick_ms: u64,
    /// Serve every LLM call from this script instead of the HTTP provider.
    pub mock_script: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { port: 8080, store_dir: PathBuf::from("data"), tick_ms: 100, mock_script: None }
    }
}

fn parse<T: std::str::FromStr>(var: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(var) {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|e: T::Err| ConfigError::Var { var, message: e.to_string() })
        }
        _ => Ok(None),
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        let d = Self::default();
        Ok(Self {
            port: parse(PORT_ENV)?.unwrap_or(d.port),
            store_dir: parse(STORE_ENV)?.unwrap_or(d.store_dir),
            tick_ms: parse(TICK_MS_ENV)?.unwrap_or(d.tick_ms),
            mock_script: parse(MOCK_ENV)?,
        })
    }

    pub fn manual_clock(&self) -> bool {
        self.tick_ms == 0
    }

    /// The mock script when one is set, else the HTTP provider from the LLM variables,
    /// else the script-less mock (template defaults only).
    pub fn provider(&self) -> Result<Arc<dyn Provider>, ConfigError> {
        if let Some(path) = &self.mock_script {
            return Ok(Arc::new(ScriptedMock::load(path)?));
        }
        if let Some(http) = HttpConfig::from_env() {
            return Ok(Arc::new(HttpProvider::new(http)));
        }
        tracing::warn!("no LLM configured, answering from template defaults");
        Ok(Arc::new(ScriptedMock::empty()))
    }
}
