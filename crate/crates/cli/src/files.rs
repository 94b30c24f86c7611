//! On-disk card and server configuration documents.

use std::fs;
use std::io;
use std::path::Path;

use authlab_core::{AuthPolicy, Bits, HashId, ServerSecrets, SmartcardState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CARD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

impl FileError {
    fn invalid(path: &Path, msg: impl ToString) -> Self {
        FileError::Invalid {
            path: path.display().to_string(),
            msg: msg.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardFile {
    pub format_version: u32,
    pub hash_id: String,
    pub k: usize,
    pub n_i: String,
    pub y: String,
}

impl CardFile {
    pub fn from_state(card: &SmartcardState) -> Self {
        CardFile {
            format_version: CARD_FORMAT_VERSION,
            hash_id: card.hash_id.to_string(),
            k: card.k,
            n_i: card.n_i.to_hex(),
            y: card.y.to_hex(),
        }
    }

    pub fn to_state(&self) -> Result<SmartcardState, String> {
        if self.format_version != CARD_FORMAT_VERSION {
            return Err(format!(
                "unsupported card format_version {}",
                self.format_version
            ));
        }
        let hash_id: HashId = self.hash_id.parse().map_err(|e| format!("hash_id: {e}"))?;
        if self.k != hash_id.width_bits() {
            return Err(format!(
                "k = {} does not match {hash_id} ({} bits)",
                self.k,
                hash_id.width_bits()
            ));
        }
        Ok(SmartcardState {
            n_i: Bits::from_hex(&self.n_i).map_err(|e| format!("n_i: {e}"))?,
            y: Bits::from_hex(&self.y).map_err(|e| format!("y: {e}"))?,
            hash_id,
            k: self.k,
        })
    }
}

pub fn load_card(path: &Path) -> Result<SmartcardState, FileError> {
    let raw = fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let file: CardFile = serde_json::from_str(&raw).map_err(|e| FileError::invalid(path, e))?;
    file.to_state().map_err(|e| FileError::invalid(path, e))
}

pub fn save_card(path: &Path, card: &SmartcardState) -> Result<(), FileError> {
    write_json(path, &CardFile::from_state(card))
}

fn default_window() -> u64 {
    authlab_core::protocol::DEFAULT_WINDOW_SECS
}

fn default_skew() -> u64 {
    authlab_core::protocol::DEFAULT_SKEW_SECS
}

fn default_bind() -> String {
    "127.0.0.1:7878".into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub x_hex: String,
    pub y_hex: String,
    #[serde(default = "default_bind")]
    pub bind_address: String,
    #[serde(default = "default_window")]
    pub window_secs: u64,
    #[serde(default = "default_skew")]
    pub skew_secs: u64,
}

/// A config whose secrets and policy have been checked.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub secrets: ServerSecrets,
    pub policy: AuthPolicy,
    pub bind_address: String,
}

impl ServerConfig {
    pub fn new(secrets: &ServerSecrets, bind_address: String) -> Self {
        ServerConfig {
            x_hex: secrets.x.to_hex(),
            y_hex: secrets.y.to_hex(),
            bind_address,
            window_secs: default_window(),
            skew_secs: default_skew(),
        }
    }

    pub fn validate(&self) -> Result<LoadedConfig, String> {
        let x = Bits::from_hex(&self.x_hex).map_err(|e| format!("x_hex: {e}"))?;
        let y = Bits::from_hex(&self.y_hex).map_err(|e| format!("y_hex: {e}"))?;
        let policy =
            AuthPolicy::new(self.window_secs, self.skew_secs).map_err(|e| e.to_string())?;
        Ok(LoadedConfig {
            secrets: ServerSecrets::new(x, y),
            policy,
            bind_address: self.bind_address.clone(),
        })
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, FileError> {
    let raw = fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let cfg: ServerConfig = serde_json::from_str(&raw).map_err(|e| FileError::invalid(path, e))?;
    cfg.validate().map_err(|e| FileError::invalid(path, e))
}

pub fn save_config(path: &Path, cfg: &ServerConfig) -> Result<(), FileError> {
    write_json(path, cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value).expect("document serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| FileError::Write {
        path: path.display().to_string(),
        source,
    })
}
