//! Scripted in-process backend for deterministic offline runs and tests.

use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::gateway::request::{ChatRequest, ChatResponse};
use crate::gateway::ChatBackend;

type Responder = Box<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>;

/// Answers requests from a list of responder rules; the first rule that
/// returns `Some` wins. Unmatched requests fail loudly so scripts stay
/// honest about what they cover.
#[derive(Default)]
pub struct ScriptedBackend {
    rules: Vec<Responder>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend { rules: Vec::new() }
    }

    /// Add a responder rule. Rules are consulted in insertion order.
    pub fn on(mut self, rule: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        self.rules.push(Box::new(rule));
        self
    }

    /// Add a rule that pops queued responses whenever `matcher` accepts a
    /// request; once the queue drains the rule stops matching.
    pub fn on_sequence(
        self,
        matcher: impl Fn(&ChatRequest) -> bool + Send + Sync + 'static,
        responses: Vec<String>,
    ) -> Self {
        let queue = Mutex::new(std::collections::VecDeque::from(responses));
        self.on(move |req| {
            if matcher(req) {
                queue.lock().unwrap().pop_front()
            } else {
                None
            }
        })
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, _model: &str, request: &ChatRequest) -> Result<ChatResponse> {
        for rule in &self.rules {
            if let Some(text) = rule(request) {
                return Ok(ChatResponse {
                    text,
                    prompt_tokens: 0,
                    completion_tokens: 0,
                    backend_id: "scripted".to_string(),
                });
            }
        }
        let head: String = request.user_prompt.chars().take(120).collect();
        Err(Error::Backend(format!(
            "scripted backend has no rule for {} request starting: {head:?}",
            request.role
        )))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::request::ModelRole;

    fn request(prompt: &str) -> ChatRequest {
        ChatRequest {
            role: ModelRole::Judge,
            system_prompt: String::new(),
            user_prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 64,
            seed: None,
        }
    }

    #[test]
    fn first_matching_rule_wins() {
        let backend = ScriptedBackend::new()
            .on(|r| r.user_prompt.contains("alpha").then(|| "A".to_string()))
            .on(|_| Some("fallback".to_string()));
        assert_eq!(backend.send("m", &request("alpha")).unwrap().text, "A");
        assert_eq!(backend.send("m", &request("beta")).unwrap().text, "fallback");
    }

    #[test]
    fn sequences_drain_in_order() {
        let backend =
            ScriptedBackend::new().on_sequence(|_| true, vec!["one".into(), "two".into()]);
        assert_eq!(backend.send("m", &request("x")).unwrap().text, "one");
        assert_eq!(backend.send("m", &request("x")).unwrap().text, "two");
        assert!(backend.send("m", &request("x")).is_err());
    }
}
