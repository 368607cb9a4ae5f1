//! Chat-completion access and test extraction.
//!
//! Backends implement [`ChatBackend`]: [`HttpBackend`] talks to an
//! OpenAI-style `/chat/completions` endpoint, [`MockBackend`] replays canned
//! replies keyed by a hash of the request messages.

mod extract;
mod http;
mod mock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::{extract_tests, Extracted};
pub use http::{HttpBackend, HttpConfig, DEFAULT_API_KEY_ENV};
pub use mock::{MockBackend, MockScript};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("chat endpoint timed out")]
    EndpointTimeout,
    #[error("chat endpoint failed (status {status:?}): {message}")]
    EndpointError { status: Option<u16>, message: String },
    #[error("session budget exhausted before the call")]
    BudgetExhausted,
    #[error("mock replay has no reply for request {0}")]
    MockMiss(String),
    #[error("cannot load mock replay: {0}")]
    MockLoad(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<(Role, String)>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_name: String,
}

impl ChatRequest {
    /// Deterministic decoding by default.
    pub fn new(model_name: impl Into<String>, messages: Vec<(Role, String)>) -> Self {
        Self { messages, temperature: 0.0, max_output_tokens: 2048, model_name: model_name.into() }
    }

    /// Hex SHA-256 over `role \0 content \0` for every message.
    pub fn prompt_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (role, content) in &self.messages {
            hasher.update(role.as_str().as_bytes());
            hasher.update([0]);
            hasher.update(content.as_bytes());
            hasher.update([0]);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub latency_ms: u64,
    pub endpoint_status: u16,
}

pub trait ChatBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}
