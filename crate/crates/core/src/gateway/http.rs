//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gateway::request::{ChatRequest, ChatResponse};
use crate::gateway::ChatBackend;

/// Speaks `POST {base_url}/chat/completions` with bearer auth. The API key
/// is read from the named environment variable at call time and never
/// persisted anywhere.
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key_env: String,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>, api_key_env: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Backend(format!("http client: {e}")))?;
        Ok(HttpChatBackend {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key_env: api_key_env.into(),
        })
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env).map_err(|_| {
            Error::Backend(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))
        })
    }
}

#[derive(Deserialize)]
struct CompletionReply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
    #[serde(default)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatBackend for HttpChatBackend {
    fn send(&self, model: &str, request: &ChatRequest) -> Result<ChatResponse> {
        let mut body = json!({
            "model": model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }

        let url = format!("{}/chat/completions", self.base_url);
        let response = self
            .client
            .post(&url)
            .bearer_auth(self.api_key()?)
            .json(&body)
            .send()
            .map_err(|e| Error::Transport {
                attempts: 1,
                message: format!("{url}: {e}"),
            })?;

        let status = response.status();
        if status.as_u16() == 429 {
            return Err(Error::RateLimited {
                attempts: 1,
                message: format!("{url}: 429"),
            });
        }
        if status.is_server_error() {
            return Err(Error::Transport {
                attempts: 1,
                message: format!("{url}: {status}"),
            });
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(Error::Backend(format!("{url}: {status}: {detail}")));
        }

        let reply: CompletionReply = response.json().map_err(|e| Error::Transport {
            attempts: 1,
            message: format!("{url}: invalid reply body: {e}"),
        })?;
        let choice = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Backend(format!("{url}: reply has no choices")))?;
        let usage = reply.usage.unwrap_or_default();
        Ok(ChatResponse {
            text: choice.message.content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            backend_id: reply.model.unwrap_or_else(|| model.to_string()),
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}
