//! Gateway settings, read from TOML. Every key is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vitalchat_core::config::OrchestratorConfig;
use vitalchat_core::eval::DatasetLayout;

/// Which model backend serves the interpreter and the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    /// Deterministic offline stubs.
    Stub,
    /// OpenAI-compatible chat-completions endpoint, credentials from the environment.
    Live,
}

/// Outbound chat channel. Only the loopback transport ships; the chat client
/// reads it through `GET /v1/outbox`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Loopback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub listen: String,
    /// Journal, audit log and media live here. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub client: ClientKind,
    pub transport: TransportKind,
    /// Seconds between retries of messages held back by a transport outage.
    pub retry_interval_s: u64,
    /// Seconds between scheduler ticks.
    pub tick_interval_s: u64,
    pub max_body_bytes: usize,
    pub orchestrator: OrchestratorConfig,
    pub dataset: DatasetLayout,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: None,
            client: ClientKind::Stub,
            transport: TransportKind::Loopback,
            retry_interval_s: 5,
            tick_interval_s: 30,
            max_body_bytes: 2 * 1024 * 1024,
            orchestrator: OrchestratorConfig::default(),
            dataset: DatasetLayout::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }
}
