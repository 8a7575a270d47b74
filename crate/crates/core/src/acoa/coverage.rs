use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{QueryIntent, ReflectionConfig};
use crate::doc::{Chunk, Modality};
use crate::text::{content_terms, loose_terms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageAssessment {
    pub term_coverage: f64,
    pub intent_satisfied: bool,
    pub missing_terms: Vec<String>,
    pub sufficient: bool,
}

/// Terms visible in a chunk: text, caption and breadcrumb.
pub(crate) fn chunk_terms(chunk: &Chunk) -> BTreeSet<String> {
    let mut terms = loose_terms(&chunk.searchable_text());
    terms.extend(loose_terms(&chunk.breadcrumb.join(" ")));
    terms
}

/// Query content terms absent from every chunk in `context`, in query order.
pub fn missing_terms(query: &str, context: &[&Chunk]) -> Vec<String> {
    let seen: BTreeSet<String> = context.iter().flat_map(|c| chunk_terms(c)).collect();
    content_terms(query).into_iter().filter(|t| !seen.contains(t)).collect()
}

/// Judge whether `context` (the chunks that would reach synthesis) plus the
/// tool outputs can answer `query`.
///
/// Term coverage is the share of query content terms found in the context
/// text, captions and breadcrumbs; a query without content terms counts as
/// fully covered.
pub fn assess_coverage(
    query: &str,
    context: &[&Chunk],
    tool_outputs: &[String],
    intent: QueryIntent,
    cfg: &ReflectionConfig,
) -> CoverageAssessment {
    let wanted = content_terms(query);
    let missing = missing_terms(query, context);
    let term_coverage = if wanted.is_empty() {
        1.0
    } else {
        (wanted.len() - missing.len()) as f64 / wanted.len() as f64
    };
    let has = |m: Modality| context.iter().any(|c| c.modality == m);
    let intent_satisfied = match intent {
        QueryIntent::Factoid => true,
        QueryIntent::TableLookup | QueryIntent::Computation => has(Modality::Table) || !tool_outputs.is_empty(),
        QueryIntent::VisualDiagram => has(Modality::Figure),
        QueryIntent::MultiHop => {
            let docs: BTreeSet<&str> = context.iter().map(|c| c.doc_id.as_str()).collect();
            let groups: BTreeSet<&Vec<String>> = context.iter().map(|c| &c.breadcrumb).collect();
            docs.len() >= 2 || groups.len() >= 2
        }
    };
    CoverageAssessment {
        term_coverage,
        intent_satisfied,
        missing_terms: missing,
        sufficient: term_coverage >= cfg.coverage_threshold && intent_satisfied,
    }
}
