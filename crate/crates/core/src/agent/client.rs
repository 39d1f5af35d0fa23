//! Model-client abstraction and provider routing.
//!
//! Model strings carry an optional vendor prefix (`openai/gpt-4o-mini`,
//! `anthropic/claude-3-5-sonnet`, `gemini/gemini-2.5-pro`, `x-ai/grok-4`);
//! anything else is sent to the default provider under its full name.

use alloc::string::{String, ToString};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::memory::MemoryWindow;
use super::prompt::{build_context_prompt, build_decision_prompt};
use super::response::{parse_allocation_response, ParsedResponse, ProtocolError};
use super::{Agent, DecisionInput, Reply};
use crate::domain::{MarketSpec, Observation};

pub const DEFAULT_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_MAX_TOKENS: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("model request timed out")]
    Timeout,
    #[error("model request rejected: {0}")]
    Rejected(String),
    #[error("model transport failure: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    OpenAi,
    Anthropic,
    Gemini,
    XAi,
    Together,
}

/// Splits a model string into provider and provider-local model name.
pub fn route_model(model: &str) -> (Provider, &str) {
    if let Some((prefix, rest)) = model.split_once('/') {
        let provider = match prefix.to_ascii_lowercase().as_str() {
            "openai" => Some(Provider::OpenAi),
            "anthropic" => Some(Provider::Anthropic),
            "gemini" | "google" => Some(Provider::Gemini),
            "x-ai" | "xai" => Some(Provider::XAi),
            "together" | "together_ai" => Some(Provider::Together),
            _ => None,
        };
        if let Some(p) = provider {
            return (p, rest);
        }
    }
    (Provider::Together, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStyle {
    #[default]
    Standard,
    /// Reasoning-style models: sampling parameters are left to provider defaults.
    StructuredReasoning,
}

impl SamplingStyle {
    /// Heuristic for models that reject custom sampling parameters.
    pub fn infer(model: &str) -> Self {
        let (_, name) = route_model(model);
        let name = name.to_ascii_lowercase();
        let reasoning = name.starts_with("gpt-5")
            || name.starts_with("o1")
            || name.starts_with("o3")
            || name.starts_with("o4");
        if reasoning {
            SamplingStyle::StructuredReasoning
        } else {
            SamplingStyle::Standard
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClientConfig {
    pub model: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub style: SamplingStyle,
}

impl ModelClientConfig {
    pub fn standard(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: Some(DEFAULT_TEMPERATURE),
            max_tokens: Some(DEFAULT_MAX_TOKENS),
            style: SamplingStyle::Standard,
        }
    }

    pub fn structured_reasoning(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: None,
            max_tokens: None,
            style: SamplingStyle::StructuredReasoning,
        }
    }

    /// Picks the style from the model name.
    pub fn for_model(model: impl Into<String>) -> Self {
        let model = model.into();
        match SamplingStyle::infer(&model) {
            SamplingStyle::Standard => Self::standard(model),
            SamplingStyle::StructuredReasoning => Self::structured_reasoning(model),
        }
    }

    pub fn request(&self, prompt: &str) -> ChatRequest {
        let (provider, model) = route_model(&self.model);
        let (temperature, max_tokens) = match self.style {
            SamplingStyle::Standard => (self.temperature, self.max_tokens),
            SamplingStyle::StructuredReasoning => (None, None),
        };
        ChatRequest {
            provider,
            model: model.to_string(),
            prompt: prompt.to_string(),
            temperature,
            max_tokens,
        }
    }
}

/// One single-turn chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub provider: Provider,
    pub model: String,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

pub trait ChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for alloc::sync::Arc<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

/// Result of one model decision: the prompt sent, the raw text received and
/// the parse outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub prompt: String,
    pub raw: String,
    pub parsed: Result<ParsedResponse, ProtocolError>,
}

/// Renders the prompt for `obs`, issues exactly one request and parses the reply.
pub fn agent_decide<C: ChatClient + ?Sized>(
    client: &C,
    config: &ModelClientConfig,
    spec: &MarketSpec,
    obs: &Observation,
    memory: &MemoryWindow,
    date: NaiveDate,
) -> Result<Decision, ClientError> {
    let context = build_context_prompt(spec, obs, memory);
    let prompt = build_decision_prompt(&context, spec, date);
    let raw = client.complete(&config.request(&prompt))?;
    let parsed = parse_allocation_response(&raw, spec);
    Ok(Decision { prompt, raw, parsed })
}

/// Agent backed by a chat model.
#[derive(Debug, Clone)]
pub struct LlmAgent<C> {
    client: C,
    config: ModelClientConfig,
}

impl<C: ChatClient> LlmAgent<C> {
    pub fn new(client: C, config: ModelClientConfig) -> Self {
        Self { client, config }
    }

    pub fn config(&self) -> &ModelClientConfig {
        &self.config
    }
}

impl<C: ChatClient> Agent for LlmAgent<C> {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        self.client
            .complete(&self.config.request(input.prompt))
            .map(Reply::Text)
    }
}
