use std::time::Duration;

use log::debug;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{truncate_for_log, ChatModel, ChatRequest, ChatResponse, Embedder, GatewayError, TokenUsage};
use crate::spaces::{EmbedderKind, EmbedderSpec, Embedding};

/// Maximum number of inputs per remote embedding call.
pub const EMBED_BATCH_SIZE: usize = 128;

/// Connection settings for an OpenAI-compatible endpoint. Holds the *name*
/// of the credential variable, never the key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key_env_var: String,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_model: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    500
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, api_key_env_var: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env_var: api_key_env_var.into(),
            model_name: model_name.into(),
            embedding_model: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            backoff_base_ms: default_backoff_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_ms < 1000 {
            return Err(GatewayError::InvalidRequest(format!(
                "timeout_ms must be >= 1000, got {}",
                self.timeout_ms
            )));
        }
        if self.base_url.trim().is_empty() || self.model_name.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("base_url and model_name are required".into()));
        }
        Ok(())
    }
}

enum Attempt {
    Done(Value),
    Retry(GatewayError),
    Fail(GatewayError),
}

/// Blocking client for chat and embeddings with bounded retry.
pub struct RemoteClient {
    cfg: ProviderConfig,
    http: reqwest::blocking::Client,
    embed_spec: EmbedderSpec,
}

impl RemoteClient {
    pub fn new(cfg: ProviderConfig, embedding_dim: usize) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let embed_spec = EmbedderSpec {
            kind: EmbedderKind::Remote,
            dim: embedding_dim,
            model_name: Some(cfg.embedding_model.clone().unwrap_or_else(|| cfg.model_name.clone())),
        };
        Ok(Self { cfg, http, embed_spec })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.cfg.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, url: &str, body: &Value, key: &str) -> Attempt {
        let resp = match self.http.post(url).bearer_auth(key).json(body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(GatewayError::Timeout { attempts: 0 }),
            Err(e) => return Attempt::Fail(GatewayError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 {
            return Attempt::Retry(GatewayError::RateLimited { attempts: 0 });
        }
        if status >= 500 {
            return Attempt::Retry(GatewayError::ServerError { status, attempts: 0 });
        }
        if !(200..300).contains(&status) {
            let text = resp.text().unwrap_or_default();
            return Attempt::Fail(GatewayError::InvalidRequest(format!(
                "HTTP {status}: {}",
                truncate_for_log(&text)
            )));
        }
        match resp.json::<Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) if e.is_timeout() => Attempt::Retry(GatewayError::Timeout { attempts: 0 }),
            Err(e) => Attempt::Fail(GatewayError::MalformedResponse(e.to_string())),
        }
    }

    /// POST `body` to `path`, retrying 429/5xx/timeouts with exponential
    /// backoff plus jitter. At most `max_retries + 1` attempts.
    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let key = std::env::var(&self.cfg.api_key_env_var)
            .map_err(|_| GatewayError::MissingCredential(self.cfg.api_key_env_var.clone()))?;
        let url = self.url(path);
        let max_attempts = self.cfg.max_retries + 1;
        let mut last = GatewayError::Transport("no attempt made".into());
        for attempt in 1..=max_attempts {
            match self.attempt(&url, body, &key) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    debug!("{url}: attempt {attempt}/{max_attempts} failed: {e}");
                    last = e;
                }
            }
            if attempt < max_attempts {
                let base = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                let jitter = rand::random_range(0..=self.cfg.backoff_base_ms / 2);
                std::thread::sleep(Duration::from_millis(base + jitter));
            }
        }
        Err(match last {
            GatewayError::Timeout { .. } => GatewayError::Timeout { attempts: max_attempts },
            GatewayError::RateLimited { .. } => GatewayError::RateLimited { attempts: max_attempts },
            GatewayError::ServerError { status, .. } => GatewayError::ServerError {
                status,
                attempts: max_attempts,
            },
            other => other,
        })
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        let body = json!({
            "model": self.embed_spec.model_name,
            "input": batch,
        });
        let v = self.post("embeddings", &body)?;
        let data = v["data"]
            .as_array()
            .ok_or_else(|| GatewayError::MalformedResponse("missing `data` array".into()))?;
        if data.len() != batch.len() {
            return Err(GatewayError::MalformedResponse(format!(
                "expected {} embeddings, got {}",
                batch.len(),
                data.len()
            )));
        }
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map_or(i, |x| x as usize);
            let values = item["embedding"]
                .as_array()
                .ok_or_else(|| GatewayError::MalformedResponse("missing `embedding`".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| GatewayError::MalformedResponse("non-numeric embedding".into())))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != self.embed_spec.dim {
                return Err(GatewayError::MalformedResponse(format!(
                    "embedding width {} does not match configured dim {}",
                    values.len(),
                    self.embed_spec.dim
                )));
            }
            rows.push((index, values));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| Embedding::normalized(&v)).collect())
    }
}

impl ChatModel for RemoteClient {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        debug!(
            "chat -> {} model={} prompt={}",
            self.cfg.base_url,
            self.cfg.model_name,
            truncate_for_log(&req.user_prompt)
        );
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "max_tokens": req.max_output_tokens,
            "temperature": req.temperature,
        });
        let v = self.post("chat/completions", &body)?;
        let choice = &v["choices"][0];
        if choice.is_null() {
            return Err(GatewayError::MalformedResponse("no choices in response".into()));
        }
        let message = &choice["message"];
        if let Some(refusal) = message["refusal"].as_str() {
            return Err(GatewayError::ProviderRefusal(refusal.to_string()));
        }
        let text = message["content"].as_str().unwrap_or_default().to_string();
        if text.is_empty() {
            let reason = choice["finish_reason"].as_str().unwrap_or("empty content");
            return Err(GatewayError::ProviderRefusal(reason.to_string()));
        }
        debug!("chat <- {}", truncate_for_log(&text));
        Ok(ChatResponse {
            text,
            token_usage: TokenUsage {
                input: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0) as u32,
                output: v["usage"]["completion_tokens"].as_u64().unwrap_or(0) as u32,
            },
            provider: self.cfg.base_url.clone(),
        })
    }
}

impl Embedder for RemoteClient {
    fn spec(&self) -> &EmbedderSpec {
        &self.embed_spec
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(EMBED_BATCH_SIZE) {
            out.extend(self.embed_batch(batch)?);
        }
        Ok(out)
    }
}
