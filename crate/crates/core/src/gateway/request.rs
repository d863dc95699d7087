//! Chat request/response types and the stable request digest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The three model roles the pipeline talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    /// Proposes and rewrites humor strategies.
    Strategy,
    /// Executes the chain-of-thought templates that write jokes.
    Generation,
    /// Scores, compares, and criticizes jokes.
    Judge,
}

impl ModelRole {
    pub const ALL: [ModelRole; 3] = [ModelRole::Strategy, ModelRole::Generation, ModelRole::Judge];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelRole::Strategy => "strategy",
            ModelRole::Generation => "generation",
            ModelRole::Judge => "judge",
        }
    }
}

impl std::fmt::Display for ModelRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One chat-completion request. Field values fully determine the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: ModelRole,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<i64>,
}

impl ChatRequest {
    /// Validate the type invariants callers must uphold.
    pub fn validate(&self) -> Result<()> {
        if self.user_prompt.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Stable hex digest over a canonical, length-prefixed serialization of
    /// every field. Equal fields always hash equal; any field change changes
    /// the digest.
    pub fn digest(&self) -> String {
        let mut canon = String::new();
        canon.push_str("v1");
        push_field(&mut canon, "role", self.role.as_str());
        push_field(&mut canon, "system", &self.system_prompt);
        push_field(&mut canon, "user", &self.user_prompt);
        push_field(&mut canon, "temperature", &format_f64(self.temperature));
        push_field(&mut canon, "max_tokens", &self.max_tokens.to_string());
        match self.seed {
            Some(s) => push_field(&mut canon, "seed", &s.to_string()),
            None => push_field(&mut canon, "seed", "none"),
        }
        let hash = Sha256::digest(canon.as_bytes());
        hex::encode(hash)
    }
}

fn push_field(canon: &mut String, name: &str, value: &str) {
    canon.push('|');
    canon.push_str(name);
    canon.push('(');
    canon.push_str(&value.len().to_string());
    canon.push_str(")=");
    canon.push_str(value);
}

/// Shortest round-trip decimal form, stable across platforms.
fn format_f64(value: f64) -> String {
    format!("{value}")
}

/// A completed chat call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub backend_id: String,
}
