use std::path::PathBuf;

use lowmt_core::backends::DecodingOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub bind: String,
    pub registry: PathBuf,
    /// Maximum number of models kept loaded at once.
    pub capacity: usize,
    /// Longest accepted `text`, in characters.
    pub max_input_chars: usize,
    /// Most lines accepted in one `text`; each line is translated separately.
    pub max_batch: usize,
    /// Origins allowed by CORS; `*` allows any.
    pub cors_origins: Vec<String>,
    pub decoding: DecodingOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            registry: PathBuf::from("registry"),
            capacity: 2,
            max_input_chars: 2000,
            max_batch: 32,
            cors_origins: vec!["http://localhost:5173".into()],
            decoding: DecodingOptions::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid server config: {0}")]
pub struct ConfigError(pub String);

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("capacity", self.capacity),
            ("max_input_chars", self.max_input_chars),
            ("max_batch", self.max_batch),
        ] {
            if value == 0 {
                return Err(ConfigError(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}
