use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatModel, ChatRequest, ChatResponse, Embedder, GatewayError, TokenUsage};
use crate::spaces::{mock_embed, EmbedderSpec, Embedding};
use crate::text::{content_terms, split_sentences, token_estimate};

/// Returned by the extractive mock when no context sentence shares a term
/// with the question.
pub const NO_ANSWER: &str = "No answer found in the provided context.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockPolicy {
    ExtractiveSynthesis,
    Echo,
    Fixed(String),
}

#[derive(Debug, Clone)]
pub struct MockChat {
    policy: MockPolicy,
}

impl MockChat {
    pub fn new(policy: MockPolicy) -> Self {
        Self { policy }
    }
}

impl ChatModel for MockChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let text = match &self.policy {
            MockPolicy::Echo => req.user_prompt.clone(),
            MockPolicy::Fixed(s) => s.clone(),
            MockPolicy::ExtractiveSynthesis => extractive_answer(&req.user_prompt),
        };
        Ok(ChatResponse {
            token_usage: TokenUsage {
                input: (token_estimate(&req.system_prompt) + token_estimate(&req.user_prompt)) as u32,
                output: token_estimate(&text) as u32,
            },
            text,
            provider: "mock".into(),
        })
    }
}

fn citation_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\[\d+\]").expect("static regex"))
}

/// Pick the CONTEXT sentence sharing the most content terms with the
/// QUESTION block; ties go to the earliest sentence.
///
/// Lines starting with a `[n]` citation marker are treated as headers and
/// skipped. Each remaining line is split into sentences.
pub fn extractive_answer(user_prompt: &str) -> String {
    let (context, question) = match (user_prompt.find("CONTEXT:"), user_prompt.rfind("QUESTION:")) {
        (Some(c), Some(q)) if c < q => (&user_prompt[c + 8..q], &user_prompt[q + 9..]),
        (None, Some(q)) => ("", &user_prompt[q + 9..]),
        _ => (user_prompt, ""),
    };
    let wanted: BTreeSet<String> = content_terms(question).into_iter().collect();
    let mut best: Option<(usize, &str)> = None;
    for line in context.lines() {
        if citation_header().is_match(line.trim_start()) {
            continue;
        }
        for sentence in split_sentences(line) {
            let sentence = sentence.trim();
            if sentence.is_empty() {
                continue;
            }
            let overlap = content_terms(sentence)
                .iter()
                .filter(|t| wanted.contains(*t))
                .count();
            if overlap > 0 && best.is_none_or(|(b, _)| overlap > b) {
                best = Some((overlap, sentence));
            }
        }
    }
    best.map_or_else(|| NO_ANSWER.to_string(), |(_, s)| s.to_string())
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    spec: EmbedderSpec,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            spec: EmbedderSpec::mock(dim),
        }
    }
}

impl Embedder for MockEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        Ok(texts.iter().map(|t| mock_embed(t, self.spec.dim)).collect())
    }
}
