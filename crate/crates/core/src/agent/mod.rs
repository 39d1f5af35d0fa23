//! The decision side of a session: `a_t = f(o_t, M_t)`.
//!
//! An [`Agent`] receives the rendered decision prompt together with the
//! observation and memory it was built from, and replies with raw text (to be
//! parsed by [`response::parse_allocation_response`]) or an explicit hold.

pub mod baseline;
pub mod client;
pub mod features;
pub mod memory;
pub mod prompt;
pub mod response;

use alloc::boxed::Box;
use alloc::string::String;

use crate::domain::{MarketSpec, Observation};

pub use baseline::{
    baseline_all_cash, baseline_equal_weight, baseline_hold, AllCashAgent, EqualWeightAgent,
    HoldAgent, ScriptedAgent,
};
pub use client::{
    agent_decide, route_model, ChatClient, ChatRequest, ClientError, Decision, LlmAgent,
    ModelClientConfig, Provider, SamplingStyle,
};
pub use features::{extract_features, FeatureBundle};
pub use memory::{MemoryEntry, MemoryWindow};
pub use prompt::{build_context_prompt, build_decision_prompt, PromptOptions};
pub use response::{parse_allocation_response, render_response, ParsedResponse, ProtocolError};

/// Everything an agent may look at when deciding.
#[derive(Debug, Clone, Copy)]
pub struct DecisionInput<'a> {
    pub spec: &'a MarketSpec,
    pub observation: &'a Observation,
    pub memory: &'a MemoryWindow,
    pub prompt: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    /// A model response in the allocation wire schema (or something that was meant to be).
    Text(String),
    /// Keep current holdings untouched.
    Hold,
}

pub trait Agent {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        (**self).decide(input)
    }
}

impl<A: Agent + ?Sized> Agent for &mut A {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        (**self).decide(input)
    }
}
