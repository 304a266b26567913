//! Model-client interface shared by the interpreter, router and orchestrator,
//! plus deterministic clients used offline and in tests.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
}

impl ModelParams {
    pub fn new(model_name: impl Into<String>, temperature: f64, top_p: f64) -> Result<Self, String> {
        let p = ModelParams {
            model_name: model_name.into(),
            temperature,
            top_p,
        };
        p.validate()?;
        Ok(p)
    }

    /// Interpreter defaults: gpt-4o-mini, temperature 1.3, top-p 0.8.
    pub fn interpreter() -> Self {
        ModelParams {
            model_name: "gpt-4o-mini".into(),
            temperature: 1.3,
            top_p: 0.8,
        }
    }

    pub fn for_model(model_name: impl Into<String>) -> Self {
        ModelParams {
            model_name: model_name.into(),
            temperature: 1.0,
            top_p: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.model_name.trim().is_empty() {
            return Err("model_name is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("model client unavailable: {0}")]
    Unavailable(String),
    #[error("model call rejected: {0}")]
    Rejected(String),
}

/// A text-completion backend.
pub trait ModelClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &ModelParams) -> Result<String, ClientError>;
}

impl<T: ModelClient + ?Sized> ModelClient for Arc<T> {
    fn complete(&self, prompt: &str, params: &ModelParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedClient(pub String);

impl FixedClient {
    pub fn new(reply: impl Into<String>) -> Self {
        FixedClient(reply.into())
    }
}

impl ModelClient for FixedClient {
    fn complete(&self, _prompt: &str, _params: &ModelParams) -> Result<String, ClientError> {
        Ok(self.0.clone())
    }
}

/// Closure-backed client.
pub struct FnClient<F>(pub F);

impl<F> ModelClient for FnClient<F>
where
    F: Fn(&str, &ModelParams) -> Result<String, ClientError> + Send + Sync,
{
    fn complete(&self, prompt: &str, params: &ModelParams) -> Result<String, ClientError> {
        (self.0)(prompt, params)
    }
}

/// Replays scripted replies in order, then a fallback. Every call is
/// recorded so tests can inspect the prompts that were sent.
#[derive(Default)]
pub struct ScriptedClient {
    script: Mutex<VecDeque<Result<String, ClientError>>>,
    fallback: Option<String>,
    calls: Mutex<Vec<(String, ModelParams)>>,
}

impl ScriptedClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            script: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            ..Default::default()
        }
    }

    pub fn with_fallback(mut self, reply: impl Into<String>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    pub fn push(&self, reply: Result<String, ClientError>) {
        self.script.lock().push_back(reply);
    }

    pub fn calls(&self) -> Vec<(String, ModelParams)> {
        self.calls.lock().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().len()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, prompt: &str, params: &ModelParams) -> Result<String, ClientError> {
        self.calls.lock().push((prompt.to_owned(), params.clone()));
        match self.script.lock().pop_front() {
            Some(r) => r,
            None => self
                .fallback
                .clone()
                .ok_or_else(|| ClientError::Unavailable("script exhausted".into())),
        }
    }
}

/// Looks replies up by exact prompt text.
#[derive(Debug, Default, Clone)]
pub struct LookupClient {
    replies: HashMap<String, String>,
}

impl LookupClient {
    pub fn new(replies: HashMap<String, String>) -> Self {
        LookupClient { replies }
    }

    pub fn insert(&mut self, prompt: String, reply: String) {
        self.replies.insert(prompt, reply);
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl ModelClient for LookupClient {
    fn complete(&self, prompt: &str, _params: &ModelParams) -> Result<String, ClientError> {
        self.replies
            .get(prompt)
            .cloned()
            .ok_or_else(|| ClientError::Rejected("no scripted reply for prompt".into()))
    }
}
