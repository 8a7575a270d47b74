//! Provider-agnostic chat and embedding access.
//!
//! Remote providers speak the OpenAI-compatible wire dialect. The mock
//! implementations are pure functions of their input and back every
//! offline test.

mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spaces::{EmbedderSpec, Embedding};

pub use mock::{extractive_answer, MockChat, MockEmbedder, MockPolicy, NO_ANSWER};
pub use remote::{ProviderConfig, RemoteClient, EMBED_BATCH_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("provider returned HTTP {status} after {attempts} attempt(s)")]
    ServerError { status: u16, attempts: u32 },
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            max_output_tokens: 512,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompts must be non-empty".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u32,
    pub output: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub token_usage: TokenUsage,
    pub provider: String,
}

pub trait ChatModel: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    /// Order-preserving; `texts` must be non-empty.
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError>;
}

/// The chat model and embedder a pipeline runs against.
pub struct Gateway {
    pub chat: Box<dyn ChatModel>,
    pub embedder: Box<dyn Embedder>,
}

impl Gateway {
    pub fn new(chat: impl ChatModel + 'static, embedder: impl Embedder + 'static) -> Self {
        Self {
            chat: Box::new(chat),
            embedder: Box::new(embedder),
        }
    }

    /// Fully offline gateway: mock chat under `policy`, mock embeddings of
    /// width `dim`.
    pub fn mock(policy: MockPolicy, dim: usize) -> Self {
        Self::new(MockChat::new(policy), MockEmbedder::new(dim))
    }
}

pub(crate) fn truncate_for_log(s: &str) -> String {
    const LIMIT: usize = 200;
    match s.char_indices().nth(LIMIT) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}
