//! OpenAI-compatible HTTP backend (`/chat/completions`, `/embeddings`).

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{Backend, BackendError, BackendReply, CompletionRequest, TransientKind, Usage};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

pub struct OpenAiBackend {
    agent: ureq::Agent,
    base_url: String,
    api_key: String,
}

impl OpenAiBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent, base_url: base_url.into().trim_end_matches('/').to_string(), api_key: api_key.into() }
    }

    /// Key from `OPENAI_API_KEY`; a missing key is an auth error, not a panic.
    pub fn from_env(base_url: Option<&str>, timeout: Duration) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::Auth(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(base_url.unwrap_or(DEFAULT_BASE_URL), key, timeout))
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}{path}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        classify_status(status, &text)?;
        serde_json::from_str(&text).map_err(|e| BackendError::Fatal(format!("malformed response body: {e}")))
    }
}

fn transport_error(e: ureq::Error) -> BackendError {
    BackendError::Transient { kind: TransientKind::Transport, message: e.to_string() }
}

fn error_code(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/error/code").and_then(Value::as_str).map(str::to_string)
}

fn classify_status(status: u16, body: &str) -> Result<(), BackendError> {
    let snippet: String = body.chars().take(300).collect();
    match status {
        200..=299 => Ok(()),
        401 | 403 => Err(BackendError::Auth(format!("HTTP {status}: {snippet}"))),
        429 => Err(BackendError::Transient { kind: TransientKind::RateLimit, message: snippet }),
        500..=599 => Err(BackendError::Transient { kind: TransientKind::Server, message: format!("HTTP {status}") }),
        _ if error_code(body).as_deref() == Some("content_filter") => Err(BackendError::ContentFilter(snippet)),
        _ => Err(BackendError::Fatal(format!("HTTP {status}: {snippet}"))),
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

impl Backend for OpenAiBackend {
    fn id(&self) -> &str {
        "openai"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let body = json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let raw = self.post("/chat/completions", &body)?;
        let parsed: ChatResponse =
            serde_json::from_value(raw).map_err(|e| BackendError::Fatal(format!("unexpected chat response: {e}")))?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| BackendError::Fatal("no choices".into()))?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(BackendError::ContentFilter("finish_reason=content_filter".into()));
        }
        let usage = parsed.usage.unwrap_or_default();
        Ok(BackendReply {
            text: choice.message.content.unwrap_or_default(),
            usage: Usage { input_tokens: usage.prompt_tokens, output_tokens: usage.completion_tokens },
        })
    }

    fn embed(&self, model_id: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
        let raw = self.post("/embeddings", &json!({"model": model_id, "input": texts}))?;
        let mut parsed: EmbeddingResponse = serde_json::from_value(raw)
            .map_err(|e| BackendError::Fatal(format!("unexpected embedding response: {e}")))?;
        parsed.data.sort_by_key(|d| d.index);
        let usage = parsed.usage.unwrap_or_default();
        Ok((
            parsed.data.into_iter().map(|d| d.embedding).collect(),
            Usage { input_tokens: usage.prompt_tokens, output_tokens: 0 },
        ))
    }
}
