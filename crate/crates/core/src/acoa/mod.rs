//! Adaptive chain of actions: intent, plan, execution, tools, coverage,
//! reflection and synthesis.

mod coverage;
mod exec;
mod intent;
mod plan;
mod tools;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::retrieval::RetrievalError;

pub use coverage::{assess_coverage, missing_terms, CoverageAssessment};
pub use exec::{
    build_prompt, execute_plan, expand_cross_refs, explain_plan, run_pipeline, AcoaConfig, Answer, TraceEntry,
    DEFAULT_CONTEXT_BUDGET, SYNTHESIS_PROMPT,
};
pub use intent::{classify_intent, classify_intent_with_llm, QueryIntent};
pub use plan::{assemble_plan, revise_plan, with_filter, Action, LevelProfile, ReflectionConfig, RetrievalPlan, DEFAULT_K};
pub use tools::{calculate, evaluate, extract_expression, parse_grid, superlative, table_extreme, table_lookup, table_match, Extreme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcoaError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("index bundle contains no chunks")]
    EmptyCorpus,
    #[error("chunk `{0}` is not a table")]
    NotATable(String),
    #[error("tool failure: {0}")]
    ToolFailure(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}
