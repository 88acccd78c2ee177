//! Study configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Mode, ProviderProfile, RetryPolicy};
use crate::prompt::Technique;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMatrix {
    pub providers: Vec<String>,
    #[serde(default = "all_techniques")]
    pub techniques: Vec<Technique>,
    #[serde(default)]
    pub capabilities: Vec<String>,
}

fn all_techniques() -> Vec<Technique> {
    Technique::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub corpus: PathBuf,
    pub fixtures: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub providers: Vec<ProviderProfile>,
    pub study: StudyMatrix,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_max_output")]
    pub max_output_tokens: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_mode() -> Mode {
    Mode::Replay
}
fn default_parallelism() -> usize {
    4
}
fn default_max_output() -> u64 {
    4096
}
fn default_timeout() -> u64 {
    300
}

impl StudyConfig {
    /// Relative paths inside the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<StudyConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: StudyConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.fixtures, &mut cfg.out] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for p in &self.providers {
            p.validate().map_err(ConfigError::Invalid)?;
        }
        for name in &self.study.providers {
            self.provider(name)?;
        }
        if self.study.providers.is_empty() {
            return Err(ConfigError::Invalid("study names no providers".into()));
        }
        if self.study.techniques.is_empty() {
            return Err(ConfigError::Invalid("study names no techniques".into()));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.temperature != 0.0 {
            return Err(ConfigError::Invalid(format!(
                "study runs use temperature 0 (config has {})",
                self.temperature
            )));
        }
        if self.retry.attempts == 0 {
            return Err(ConfigError::Invalid("retry.attempts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn provider(&self, name: &str) -> Result<&ProviderProfile, ConfigError> {
        self.providers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown provider {name:?}")))
    }
}
