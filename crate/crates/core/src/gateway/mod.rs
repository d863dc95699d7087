//! Uniform interface to the three chat-model roles.
//!
//! The gateway routes each request to the model configured for its role,
//! retries transport failures with capped exponential backoff, extracts
//! structured objects from noisy replies, and records or replays every
//! exchange through a digest-keyed cassette for deterministic runs.

mod cassette;
mod http;
mod request;
mod retry;
pub mod scripted;
mod structured;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

pub use cassette::{Cassette, CassetteEntry, CassetteMode, CASSETTE_VERSION};
pub use http::HttpChatBackend;
pub use request::{ChatRequest, ChatResponse, ModelRole};
pub use retry::RetryPolicy;
pub use scripted::ScriptedBackend;
pub use structured::{check_fields, extract_last_object, FieldKind, FieldSpec};

use crate::config::GatewayConfig;
use crate::error::{Error, Result};

/// A concrete transport that can answer one chat request.
pub trait ChatBackend: Send + Sync {
    fn send(&self, model: &str, request: &ChatRequest) -> Result<ChatResponse>;
    fn name(&self) -> &str;
}

/// One entry in the gateway's call log. Labels identify the calling
/// pipeline stage so tests can assert which stages issued model calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub role: ModelRole,
    pub digest: String,
    pub label: String,
}

struct CassetteState {
    mode: CassetteMode,
    store: Cassette,
    path: Option<PathBuf>,
}

/// Role-routing chat client with retries, cassette record/replay, and
/// structured-output extraction. Stateless per call; cassette mutation is
/// serialized through a single-writer lock.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: GatewayConfig,
    seed: Option<i64>,
    cassette: Mutex<CassetteState>,
    call_log: Mutex<Vec<CallRecord>>,
}

impl Gateway {
    /// Build a gateway over an explicit backend. The cassette is loaded
    /// from `config.cassette_path` unless the mode is `Live`.
    pub fn new(backend: Arc<dyn ChatBackend>, config: GatewayConfig, seed: Option<i64>) -> Result<Self> {
        let path = if config.cassette_mode == CassetteMode::Live {
            None
        } else {
            Some(PathBuf::from(&config.cassette_path))
        };
        let store = match (&path, config.cassette_mode) {
            (Some(p), CassetteMode::ReplayStrict) => Cassette::load(p)?,
            (Some(p), _) => Cassette::load_or_empty(p)?,
            (None, _) => Cassette::new(),
        };
        Ok(Gateway {
            backend,
            cassette: Mutex::new(CassetteState {
                mode: config.cassette_mode,
                store,
                path,
            }),
            seed,
            config,
            call_log: Mutex::new(Vec::new()),
        })
    }

    /// Gateway that talks straight to the backend with no cassette and no
    /// sleeping between retries. The workhorse for scripted tests.
    pub fn live(backend: Arc<dyn ChatBackend>, config: GatewayConfig, seed: Option<i64>) -> Self {
        let mut config = config;
        config.cassette_mode = CassetteMode::Live;
        config.retry = RetryPolicy::immediate(config.retry.max_retries);
        Gateway {
            backend,
            cassette: Mutex::new(CassetteState {
                mode: CassetteMode::Live,
                store: Cassette::new(),
                path: None,
            }),
            seed,
            config,
            call_log: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Build a request for `role` with the configured per-role model
    /// defaults and the run seed.
    pub fn request(&self, role: ModelRole, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> ChatRequest {
        let defaults = self.config.role(role);
        ChatRequest {
            role,
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: defaults.temperature,
            max_tokens: defaults.max_tokens,
            seed: self.seed,
        }
    }

    /// Snapshot of every call issued so far, in order.
    pub fn call_log(&self) -> Vec<CallRecord> {
        self.call_log.lock().unwrap().clone()
    }

    /// Count of logged calls whose label starts with `prefix`.
    pub fn calls_labeled(&self, prefix: &str) -> usize {
        self.call_log
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.label.starts_with(prefix))
            .count()
    }

    /// Complete a chat request, honoring the cassette mode.
    pub fn complete(&self, request: &ChatRequest, label: &str) -> Result<ChatResponse> {
        request.validate()?;
        let model = self.config.role(request.role).model.clone();
        if model.is_empty() {
            return Err(Error::NoBackend {
                role: request.role.to_string(),
            });
        }
        let digest = request.digest();
        self.call_log.lock().unwrap().push(CallRecord {
            role: request.role,
            digest: digest.clone(),
            label: label.to_string(),
        });

        let mode = self.cassette.lock().unwrap().mode;
        match mode {
            CassetteMode::ReplayStrict => {
                let state = self.cassette.lock().unwrap();
                state
                    .store
                    .get(&digest)
                    .map(CassetteEntry::to_response)
                    .ok_or(Error::MissingRecording { digest })
            }
            CassetteMode::ReplayFallthrough => {
                if let Some(entry) = self.cassette.lock().unwrap().store.get(&digest) {
                    return Ok(entry.to_response());
                }
                self.send_with_retries(&model, request)
            }
            CassetteMode::Record => {
                if let Some(entry) = self.cassette.lock().unwrap().store.get(&digest) {
                    return Ok(entry.to_response());
                }
                let response = self.send_with_retries(&model, request)?;
                let mut state = self.cassette.lock().unwrap();
                state.store.insert(digest, CassetteEntry::from(&response));
                if let Some(path) = state.path.clone() {
                    state.store.save(&path)?;
                }
                Ok(response)
            }
            CassetteMode::Live => self.send_with_retries(&model, request),
        }
    }

    /// Complete a request and extract a structured object containing the
    /// required fields, re-prompting with a repair message on failure. At
    /// most `structured_retries` repair rounds are attempted.
    pub fn complete_structured(
        &self,
        request: &ChatRequest,
        fields: &[FieldSpec],
        label: &str,
    ) -> Result<serde_json::Map<String, serde_json::Value>> {
        self.complete_validated(request, fields, label, Ok)
    }

    /// Like [`Gateway::complete_structured`] but with a caller-supplied
    /// semantic check; a rejection counts as a parse failure and triggers
    /// the same repair round-trip.
    pub fn complete_validated<T>(
        &self,
        request: &ChatRequest,
        fields: &[FieldSpec],
        label: &str,
        validate: impl Fn(serde_json::Map<String, serde_json::Value>) -> std::result::Result<T, String>,
    ) -> Result<T> {
        let rounds = self.config.structured_retries + 1;
        let mut current = request.clone();
        let mut last_reason = String::new();
        for round in 0..rounds {
            let response = self.complete(&current, label)?;
            let reason = match extract_last_object(&response.text) {
                None => "reply contains no JSON object".to_string(),
                Some(map) => match check_fields(&map, fields) {
                    Err(reason) => reason,
                    Ok(()) => match validate(map) {
                        Ok(value) => return Ok(value),
                        Err(reason) => reason,
                    },
                },
            };
            last_reason = reason.clone();
            if round + 1 < rounds {
                current = repair_request(request, &response.text, &reason, fields);
            }
        }
        Err(Error::StructuredParse {
            attempts: rounds,
            message: last_reason,
        })
    }

    fn send_with_retries(&self, model: &str, request: &ChatRequest) -> Result<ChatResponse> {
        let policy = self.config.retry;
        let mut last = None;
        for attempt in 0..policy.attempts() {
            if attempt > 0 {
                let delay = policy.delay(attempt - 1);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            match self.backend.send(model, request) {
                Ok(response) => return Ok(response),
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        match last {
            Some(Error::RateLimited { message, .. }) => Err(Error::RateLimited {
                attempts: policy.attempts(),
                message,
            }),
            Some(Error::Transport { message, .. }) => Err(Error::Transport {
                attempts: policy.attempts(),
                message,
            }),
            Some(other) => Err(other),
            None => unreachable!("retry loop runs at least once"),
        }
    }
}

fn repair_request(original: &ChatRequest, reply: &str, reason: &str, fields: &[FieldSpec]) -> ChatRequest {
    let names: Vec<&str> = fields.iter().map(|f| f.name).collect();
    let mut repaired = original.clone();
    repaired.user_prompt = format!(
        "{}\n\nYour previous reply was:\n{}\n\nThat reply was rejected: {}.\n\
         Answer again with only a JSON object containing the fields: {}.",
        original.user_prompt,
        reply,
        reason,
        names.join(", ")
    );
    repaired
}
