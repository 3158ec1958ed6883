//! Runtime configuration: a TOML file with `INSTRUMENTS_*` environment
//! overrides.
//!
//! ```toml
//! adapter = "mock"          # or "remote"
//! idle_window_ms = 2000
//! edit_window_ms = 300
//! max_inflight = 4
//! base_seed = 0
//! image_size = 512
//!
//! [remote]
//! language_url = "https://api.example.com/v1/chat/completions"
//! language_model = "gpt-4o"
//! token_env = "OPENAI_API_KEY"
//! image_url = "http://127.0.0.1:7860"
//! segment_url = "http://127.0.0.1:7860"
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::SchedulerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub language_url: String,
    pub language_model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub image_url: String,
    pub segment_url: String,
    pub timeout_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            language_url: "https://api.openai.com/v1/chat/completions".into(),
            language_model: "gpt-4o".into(),
            token_env: "OPENAI_API_KEY".into(),
            image_url: "http://127.0.0.1:7860".into(),
            segment_url: "http://127.0.0.1:7860".into(),
            timeout_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub adapter: AdapterKind,
    pub idle_window_ms: u64,
    pub edit_window_ms: u64,
    pub max_inflight: usize,
    pub base_seed: u64,
    /// Width and height of txt2img output.
    pub image_size: u32,
    /// Cap on fragments surfaced by one decomposition.
    pub max_fragments: usize,
    pub remote: RemoteConfig,
}

impl Default for Config {
    fn default() -> Self {
        let s = SchedulerConfig::default();
        Config {
            adapter: AdapterKind::Mock,
            idle_window_ms: s.idle_window_ms,
            edit_window_ms: s.edit_window_ms,
            max_inflight: s.max_inflight,
            base_seed: 0,
            image_size: 512,
            max_fragments: 5,
            remote: RemoteConfig::default(),
        }
    }
}

impl Config {
    pub fn scheduler(&self) -> SchedulerConfig {
        SchedulerConfig {
            idle_window_ms: self.idle_window_ms,
            edit_window_ms: self.edit_window_ms,
            max_inflight: self.max_inflight,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` if given, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Config::default(),
        };
        config.apply_env(&std::env::vars().collect())?;
        Ok(config)
    }

    /// Applies `INSTRUMENTS_<KEY>` and `INSTRUMENTS_REMOTE_<KEY>` overrides.
    pub fn apply_env(&mut self, env: &HashMap<String, String>) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        for (key, v) in env {
            let Some(name) = key.strip_prefix("INSTRUMENTS_") else { continue };
            match name {
                "ADAPTER" => {
                    self.adapter = match v.as_str() {
                        "mock" => AdapterKind::Mock,
                        "remote" => AdapterKind::Remote,
                        _ => return Err(Error::Config(format!("{key}: expected mock or remote"))),
                    }
                }
                "IDLE_WINDOW_MS" => self.idle_window_ms = parse(key, v)?,
                "EDIT_WINDOW_MS" => self.edit_window_ms = parse(key, v)?,
                "MAX_INFLIGHT" => self.max_inflight = parse(key, v)?,
                "BASE_SEED" => self.base_seed = parse(key, v)?,
                "IMAGE_SIZE" => self.image_size = parse(key, v)?,
                "MAX_FRAGMENTS" => self.max_fragments = parse(key, v)?,
                "REMOTE_LANGUAGE_URL" => self.remote.language_url = v.clone(),
                "REMOTE_LANGUAGE_MODEL" => self.remote.language_model = v.clone(),
                "REMOTE_TOKEN_ENV" => self.remote.token_env = v.clone(),
                "REMOTE_IMAGE_URL" => self.remote.image_url = v.clone(),
                "REMOTE_SEGMENT_URL" => self.remote.segment_url = v.clone(),
                "REMOTE_TIMEOUT_MS" => self.remote.timeout_ms = parse(key, v)?,
                _ => {}
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_inflight == 0 {
            return Err(Error::Config("max_inflight must be at least 1".into()));
        }
        if self.image_size == 0 || self.image_size > 4096 {
            return Err(Error::Config("image_size must be within 1..=4096".into()));
        }
        if self.max_fragments == 0 {
            return Err(Error::Config("max_fragments must be at least 1".into()));
        }
        Ok(())
    }
}
