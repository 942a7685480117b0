//! HTTP backends for the supported provider wire formats.
//!
//! `anthropic` speaks the Messages API; every other provider tag is treated as
//! an OpenAI-compatible chat-completions endpoint. Credentials come from
//! `<PROVIDER>_API_KEY`, endpoints from `<PROVIDER>_BASE_URL` (required for
//! anything other than `openai` and `anthropic`).

use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, FinishReason, Role, Usage};

const ANTHROPIC_VERSION: &str = "2023-06-01";

/// Environment variable holding the API key for `provider`.
pub fn credential_var(provider: &str) -> String {
    format!("{}_API_KEY", env_prefix(provider))
}

fn base_url_var(provider: &str) -> String {
    format!("{}_BASE_URL", env_prefix(provider))
}

fn env_prefix(provider: &str) -> String {
    provider
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

fn default_base_url(provider: &str) -> Option<&'static str> {
    match provider {
        "openai" => Some("https://api.openai.com/v1"),
        "anthropic" => Some("https://api.anthropic.com/v1"),
        _ => None,
    }
}

/// Replaces every occurrence of each secret with `***`.
pub(crate) fn redact(text: &str, secrets: &[&str]) -> String {
    secrets
        .iter()
        .filter(|s| s.len() >= 4)
        .fold(text.to_string(), |acc, s| acc.replace(s, "***"))
}

pub(crate) fn openai_body(req: &ChatRequest) -> Value {
    let messages: Vec<Value> = req
        .messages
        .iter()
        .map(|m| {
            json!({
                "role": match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                },
                "content": m.content,
            })
        })
        .collect();
    json!({
        "model": req.model,
        "messages": messages,
        "temperature": req.temperature,
        "top_p": req.top_p,
        "max_tokens": req.max_output,
    })
}

pub(crate) fn parse_openai(body: &Value) -> Result<ChatResponse, BackendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Malformed("missing choices[0]".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))?;
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("stop") => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        _ => FinishReason::Other,
    };
    let usage = Usage {
        input_tokens: body.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        output_tokens: body
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(ChatResponse {
        content: content.to_string(),
        finish_reason,
        usage,
    })
}

pub(crate) fn anthropic_body(req: &ChatRequest) -> Value {
    let system: Vec<&str> = req
        .messages
        .iter()
        .filter(|m| m.role == Role::System)
        .map(|m| m.content.as_str())
        .collect();
    let messages: Vec<Value> = req
        .messages
        .iter()
        .filter(|m| m.role != Role::System)
        .map(|m| {
            let role = if m.role == Role::User { "user" } else { "assistant" };
            json!({"role": role, "content": m.content})
        })
        .collect();
    let mut body = json!({
        "model": req.model,
        "messages": messages,
        "max_tokens": req.max_output,
        "temperature": req.temperature,
    });
    if !system.is_empty() {
        body["system"] = Value::String(system.join("\n\n"));
    }
    // Recent models reject temperature and top_p together; 1.0 is the default.
    if req.top_p < 1.0 {
        body["top_p"] = json!(req.top_p);
    }
    body
}

pub(crate) fn parse_anthropic(body: &Value) -> Result<ChatResponse, BackendError> {
    let blocks = body
        .get("content")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::Malformed("missing content array".into()))?;
    let content: String = blocks
        .iter()
        .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
        .filter_map(|b| b.get("text").and_then(Value::as_str))
        .collect();
    let finish_reason = match body.get("stop_reason").and_then(Value::as_str) {
        Some("end_turn") | Some("stop_sequence") => FinishReason::Stop,
        Some("max_tokens") => FinishReason::Length,
        _ => FinishReason::Other,
    };
    let usage = Usage {
        input_tokens: body.pointer("/usage/input_tokens").and_then(Value::as_u64).unwrap_or(0),
        output_tokens: body.pointer("/usage/output_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok(ChatResponse {
        content,
        finish_reason,
        usage,
    })
}

pub(crate) fn classify_status(status: u16, body: &str, retry_after: Option<u64>) -> BackendError {
    let snippet: String = body.chars().take(300).collect();
    match status {
        401 | 403 => BackendError::Auth(format!("HTTP {status}: {snippet}")),
        429 => BackendError::RateLimited {
            retry_after_secs: retry_after,
        },
        // Anthropic reports overload as 529.
        500..=599 => BackendError::Transient(format!("HTTP {status}: {snippet}")),
        _ => BackendError::Other(format!("HTTP {status}: {snippet}")),
    }
}

/// Blocking HTTP client dispatching on the request's provider tag.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Other(e.to_string()))?;
        Ok(Self { client })
    }

    /// Checks that credentials and endpoints exist for `provider`.
    pub fn check_provider(provider: &str) -> Result<(), super::GatewayError> {
        if std::env::var(credential_var(provider)).is_err() {
            return Err(super::GatewayError::NoCredentials {
                provider: provider.into(),
                var: credential_var(provider),
            });
        }
        if default_base_url(provider).is_none() && std::env::var(base_url_var(provider)).is_err() {
            return Err(super::GatewayError::NoCredentials {
                provider: provider.into(),
                var: base_url_var(provider),
            });
        }
        Ok(())
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let key = std::env::var(credential_var(&req.provider))
            .map_err(|_| BackendError::Auth(format!("{} is not set", credential_var(&req.provider))))?;
        let base = std::env::var(base_url_var(&req.provider))
            .ok()
            .or_else(|| default_base_url(&req.provider).map(str::to_string))
            .ok_or_else(|| BackendError::Other(format!("{} is not set", base_url_var(&req.provider))))?;
        let base = base.trim_end_matches('/');

        let anthropic = req.provider == "anthropic";
        let builder = if anthropic {
            self.client
                .post(format!("{base}/messages"))
                .header("x-api-key", &key)
                .header("anthropic-version", ANTHROPIC_VERSION)
                .json(&anthropic_body(req))
        } else {
            self.client
                .post(format!("{base}/chat/completions"))
                .bearer_auth(&key)
                .json(&openai_body(req))
        };

        let response = builder.send().map_err(|e| {
            let msg = redact(&e.to_string(), &[&key]);
            if e.is_timeout() || e.is_connect() {
                BackendError::Transient(msg)
            } else {
                BackendError::Other(msg)
            }
        })?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok());
        let text = response
            .text()
            .map_err(|e| BackendError::Transient(redact(&e.to_string(), &[&key])))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &redact(&text, &[&key]), retry_after));
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Malformed(format!("not JSON: {e}")))?;
        if anthropic {
            parse_anthropic(&body)
        } else {
            parse_openai(&body)
        }
    }
}
