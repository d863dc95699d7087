//! Record/replay store for chat responses, keyed by request digest.
//!
//! The cassette is a single JSON file with digests as map keys. A
//! `BTreeMap` keeps the key order stable so recorded files diff cleanly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::request::ChatResponse;

pub const CASSETTE_VERSION: &str = "1";

/// How the gateway consults the cassette.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CassetteMode {
    /// Call the backend on a miss and persist the response. Hits replay.
    Record,
    /// Replay only; a miss is an error and the backend is never contacted.
    ReplayStrict,
    /// Replay on a hit, fall through to the backend on a miss (not persisted).
    ReplayFallthrough,
    /// Ignore the cassette entirely.
    #[default]
    Live,
}

impl std::fmt::Display for CassetteMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CassetteMode::Record => "record",
            CassetteMode::ReplayStrict => "replay-strict",
            CassetteMode::ReplayFallthrough => "replay-fallthrough",
            CassetteMode::Live => "live",
        };
        f.write_str(s)
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub backend_id: String,
}

impl From<&ChatResponse> for CassetteEntry {
    fn from(r: &ChatResponse) -> Self {
        CassetteEntry {
            text: r.text.clone(),
            prompt_tokens: r.prompt_tokens,
            completion_tokens: r.completion_tokens,
            backend_id: r.backend_id.clone(),
        }
    }
}

impl CassetteEntry {
    pub fn to_response(&self) -> ChatResponse {
        ChatResponse {
            text: self.text.clone(),
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
            backend_id: self.backend_id.clone(),
        }
    }
}

/// Digest-keyed response store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Cassette {
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default)]
    pub entries: BTreeMap<String, CassetteEntry>,
}

fn default_version() -> String {
    CASSETTE_VERSION.to_string()
}

impl Cassette {
    pub fn new() -> Self {
        Cassette {
            version: CASSETTE_VERSION.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, digest: &str) -> Option<&CassetteEntry> {
        self.entries.get(digest)
    }

    /// Insert a recording. Existing digests keep their first recording
    /// (append-only contract: digests are unique keys).
    pub fn insert(&mut self, digest: String, entry: CassetteEntry) {
        self.entries.entry(digest).or_insert(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cassette: Cassette = serde_json::from_str(&raw)?;
        if cassette.version != CASSETTE_VERSION {
            return Err(Error::Config(format!(
                "cassette version {} unsupported (expected {CASSETTE_VERSION})",
                cassette.version
            )));
        }
        Ok(cassette)
    }

    /// Load, tolerating a missing file (starts an empty cassette).
    pub fn load_or_empty(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Cassette::new())
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}
