//! Blocking client for an OpenAI-compatible chat-completions endpoint.

use std::time::Duration;

use serde_json::{json, Value};
use vitalchat_core::llm::{ClientError, ModelClient, ModelParams};

pub const ENV_BASE_URL: &str = "VITALCHAT_LLM_BASE_URL";
pub const ENV_API_KEY: &str = "VITALCHAT_LLM_API_KEY";
/// Overrides every requested model id, e.g. to route all calls to one local model.
pub const ENV_MODEL: &str = "VITALCHAT_LLM_MODEL";
const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct LiveClient {
    http: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model_override: Option<String>,
}

impl LiveClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, model_override: Option<String>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ClientError::Unavailable(e.to_string()))?;
        Ok(LiveClient {
            http,
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
            model_override,
        })
    }

    /// Reads the endpoint from the environment. The key falls back to
    /// `OPENAI_API_KEY`.
    pub fn from_env() -> Result<Self, ClientError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let key = var(ENV_API_KEY).or_else(|| var("OPENAI_API_KEY"));
        let base = var(ENV_BASE_URL).unwrap_or_else(|| DEFAULT_BASE_URL.to_owned());
        if key.is_none() && base == DEFAULT_BASE_URL {
            return Err(ClientError::Unavailable(format!("set {ENV_API_KEY} or OPENAI_API_KEY")));
        }
        Self::new(base, key, var(ENV_MODEL))
    }

    /// Request body. Reasoning models (`o1`, `o3-mini`, ...) reject sampling
    /// parameters, so those are only sent to other models.
    pub fn request_body(&self, prompt: &str, params: &ModelParams) -> Value {
        let model = self.model_override.as_deref().unwrap_or(&params.model_name);
        let mut body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let reasoning = model.starts_with('o') && model[1..].starts_with(|c: char| c.is_ascii_digit());
        if !reasoning {
            body["temperature"] = json!(params.temperature);
            body["top_p"] = json!(params.top_p);
        }
        body
    }
}

impl ModelClient for LiveClient {
    fn complete(&self, prompt: &str, params: &ModelParams) -> Result<String, ClientError> {
        let mut req = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .json(&self.request_body(prompt, params));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ClientError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| ClientError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            let msg = body["error"]["message"].as_str().unwrap_or("request failed");
            let err = format!("{status}: {msg}");
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                ClientError::Unavailable(err)
            } else {
                ClientError::Rejected(err)
            });
        }
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ClientError::Rejected("response has no message content".into()))
    }
}
