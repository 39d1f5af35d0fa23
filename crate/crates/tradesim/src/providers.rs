//! Chat-completion clients for the supported vendors. Credentials come from
//! environment variables only.

use std::sync::Arc;

use serde_json::{json, Value};
use tradesim_core::agent::client::{ChatClient, ChatRequest, ClientError, Provider};

use crate::http::{Http, HttpError};

pub fn default_base_url(provider: Provider) -> &'static str {
    match provider {
        Provider::OpenAi => "https://api.openai.com/v1",
        Provider::Anthropic => "https://api.anthropic.com/v1",
        Provider::Gemini => "https://generativelanguage.googleapis.com/v1beta",
        Provider::XAi => "https://api.x.ai/v1",
        Provider::Together => "https://api.together.xyz/v1",
    }
}

pub fn api_key_var(provider: Provider) -> &'static str {
    match provider {
        Provider::OpenAi => "OPENAI_API_KEY",
        Provider::Anthropic => "ANTHROPIC_API_KEY",
        Provider::Gemini => "GEMINI_API_KEY",
        Provider::XAi => "XAI_API_KEY",
        Provider::Together => "TOGETHER_API_KEY",
    }
}

/// Anthropic requires an explicit output budget.
const ANTHROPIC_FALLBACK_MAX_TOKENS: u32 = 16_000;

/// A built HTTP call: URL, headers and JSON body.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderCall {
    pub url: String,
    pub headers: Vec<(&'static str, String)>,
    pub body: Value,
}

pub fn build_call(request: &ChatRequest, base_url: &str, api_key: &str) -> ProviderCall {
    let base = base_url.trim_end_matches('/');
    match request.provider {
        Provider::OpenAi | Provider::XAi | Provider::Together => {
            let mut body = json!({
                "model": request.model,
                "messages": [{"role": "user", "content": request.prompt}],
            });
            if let Some(t) = request.temperature {
                body["temperature"] = json!(t);
            }
            if let Some(m) = request.max_tokens {
                body["max_tokens"] = json!(m);
            }
            ProviderCall {
                url: format!("{base}/chat/completions"),
                headers: vec![("authorization", format!("Bearer {api_key}"))],
                body,
            }
        }
        Provider::Anthropic => {
            let mut body = json!({
                "model": request.model,
                "max_tokens": request.max_tokens.unwrap_or(ANTHROPIC_FALLBACK_MAX_TOKENS),
                "messages": [{"role": "user", "content": request.prompt}],
            });
            if let Some(t) = request.temperature {
                body["temperature"] = json!(t);
            }
            ProviderCall {
                url: format!("{base}/messages"),
                headers: vec![
                    ("x-api-key", api_key.to_string()),
                    ("anthropic-version", "2023-06-01".to_string()),
                ],
                body,
            }
        }
        Provider::Gemini => {
            let mut generation = serde_json::Map::new();
            if let Some(t) = request.temperature {
                generation.insert("temperature".into(), json!(t));
            }
            if let Some(m) = request.max_tokens {
                generation.insert("maxOutputTokens".into(), json!(m));
            }
            let mut body = json!({
                "contents": [{"role": "user", "parts": [{"text": request.prompt}]}],
            });
            if !generation.is_empty() {
                body["generationConfig"] = Value::Object(generation);
            }
            ProviderCall {
                url: format!("{base}/models/{}:generateContent", request.model),
                headers: vec![("x-goog-api-key", api_key.to_string())],
                body,
            }
        }
    }
}

fn join_texts(parts: Option<&Vec<Value>>, key: &str) -> Option<String> {
    let texts: Vec<&str> = parts?.iter().filter_map(|p| p[key].as_str()).collect();
    (!texts.is_empty()).then(|| texts.concat())
}

/// Extracts the reply text from a provider payload.
pub fn extract_text(provider: Provider, body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Transport(format!("bad JSON: {e}")))?;
    let text = match provider {
        Provider::OpenAi | Provider::XAi | Provider::Together => {
            v["choices"][0]["message"]["content"].as_str().map(str::to_string)
        }
        Provider::Anthropic => {
            let blocks = v["content"].as_array().map(|b| {
                b.iter().filter(|c| c["type"] == "text").cloned().collect::<Vec<_>>()
            });
            join_texts(blocks.as_ref(), "text")
        }
        Provider::Gemini => join_texts(v["candidates"][0]["content"]["parts"].as_array(), "text"),
    };
    text.ok_or_else(|| ClientError::Rejected("response carried no text".into()))
}

/// Client for one vendor endpoint.
pub struct HttpChatClient {
    http: Arc<dyn Http>,
    base_url: String,
    api_key: String,
}

impl HttpChatClient {
    pub fn new(http: Arc<dyn Http>, base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            http,
            base_url: base_url.into(),
            api_key: api_key.into(),
        }
    }

    /// Reads the key from the provider's environment variable.
    pub fn from_env(http: Arc<dyn Http>, provider: Provider, base_url: Option<&str>) -> Result<Self, String> {
        let var = api_key_var(provider);
        let key = std::env::var(var).map_err(|_| format!("environment variable {var} is not set"))?;
        Ok(Self::new(http, base_url.unwrap_or(default_base_url(provider)), key))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let call = build_call(request, &self.base_url, &self.api_key);
        let body = serde_json::to_string(&call.body).expect("request body serializes");
        let resp = self.http.post_json(&call.url, &call.headers, &body).map_err(|e| match e {
            HttpError::Timeout => ClientError::Timeout,
            other => ClientError::Transport(other.to_string()),
        })?;
        if !resp.is_success() {
            let snippet: String = resp.body.chars().take(300).collect();
            return Err(ClientError::Rejected(format!("HTTP {}: {snippet}", resp.status)));
        }
        extract_text(request.provider, &resp.body)
    }
}
