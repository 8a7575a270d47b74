//! Per-space search and reciprocal rank fusion.

mod fusion;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoa::QueryIntent;
use crate::doc::Modality;
use crate::spaces::{Embedding, LexicalIndex, MetadataIndex, SemanticIndex, StructuralIndex};
use crate::text::{content_terms, tokenize};

pub use fusion::{fuse_rrf, FusionConfig, RankedEvidence, ScoredChunk};

/// BM25 term-frequency saturation.
pub const BM25_K1: f64 = 1.2;
/// BM25 length normalization.
pub const BM25_B: f64 = 0.75;
/// Structural score bonus for a modality that suits the intent.
pub const MODALITY_PRIOR: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("query embedding has dim {query}, index expects {index}")]
    DimensionMismatch { query: usize, index: usize },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("unknown metadata field `{0}`")]
    UnknownField(String),
    #[error("invalid fusion config: {0}")]
    InvalidFusion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Semantic,
    Lexical,
    Structural,
    Metadata,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 4] = [
        SpaceKind::Semantic,
        SpaceKind::Lexical,
        SpaceKind::Structural,
        SpaceKind::Metadata,
    ];
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceKind::Semantic => "semantic",
            SpaceKind::Lexical => "lexical",
            SpaceKind::Structural => "structural",
            SpaceKind::Metadata => "metadata",
        };
        f.write_str(s)
    }
}

/// `(chunk_id, score)` in rank order.
pub type Hits = Vec<(String, f64)>;

/// Score descending, then chunk id ascending.
pub(crate) fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn top_k(mut hits: Hits, k: usize) -> Hits {
    hits.sort_by(rank_order);
    hits.truncate(k);
    hits
}

/// Exact top-k cosine scan.
pub fn search_semantic(index: &SemanticIndex, query: &Embedding, k: usize) -> Result<Hits, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if query.dim() != index.spec.dim {
        return Err(RetrievalError::DimensionMismatch {
            query: query.dim(),
            index: index.spec.dim,
        });
    }
    let hits = index
        .entries
        .iter()
        .map(|(id, e)| (id.clone(), query.cosine(e)))
        .collect();
    Ok(top_k(hits, k))
}

/// BM25 (k1 = 1.2, b = 0.75) with idf `ln(1 + (N - n + 0.5) / (n + 0.5))`.
/// Repeated query terms count once; chunks sharing no term are excluded.
pub fn search_lexical(index: &LexicalIndex, query: &str, k: usize) -> Result<Hits, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let n_docs = index.total_chunks as f64;
    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for term in &terms {
        let Some(postings) = index.postings.get(term) else { continue };
        let df = postings.len() as f64;
        let idf = (1.0 + (n_docs - df + 0.5) / (df + 0.5)).ln();
        for (chunk_id, tf) in postings {
            let tf = f64::from(*tf);
            let len = f64::from(index.doc_lengths.get(chunk_id).copied().unwrap_or(0));
            let norm = if index.avg_length > 0.0 {
                1.0 - BM25_B + BM25_B * len / index.avg_length
            } else {
                1.0
            };
            *scores.entry(chunk_id).or_default() += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
        }
    }
    let hits = scores.into_iter().map(|(id, s)| (id.to_string(), s)).collect();
    Ok(top_k(hits, k))
}

fn modality_prior(modality: Modality, intent: QueryIntent) -> f64 {
    match (modality, intent) {
        (Modality::Table, QueryIntent::TableLookup) | (Modality::Figure, QueryIntent::VisualDiagram) => {
            MODALITY_PRIOR
        }
        _ => 0.0,
    }
}

/// Breadcrumb overlap (distinct shared content terms) plus a modality
/// prior. Only chunks with at least one shared breadcrumb term qualify.
pub fn search_structural(
    index: &StructuralIndex,
    query: &str,
    intent: QueryIntent,
    k: usize,
) -> Result<Hits, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let mut overlap: BTreeMap<&str, usize> = BTreeMap::new();
    for term in content_terms(query) {
        for id in index.term_index.get(&term).into_iter().flatten() {
            *overlap.entry(id).or_default() += 1;
        }
    }
    let hits = overlap
        .into_iter()
        .map(|(id, n)| {
            let prior = index
                .entries
                .get(id)
                .map_or(0.0, |e| modality_prior(e.modality, intent));
            (id.to_string(), n as f64 + prior)
        })
        .collect();
    Ok(top_k(hits, k))
}

/// Conjunction of `field = value` equality matches, expanded to chunk ids.
/// An empty predicate selects every chunk.
pub fn filter_metadata(
    index: &MetadataIndex,
    predicate: &[(String, String)],
) -> Result<BTreeSet<String>, RetrievalError> {
    let mut docs: Option<BTreeSet<&String>> = None;
    for (field, value) in predicate {
        if !index.knows_field(field) {
            return Err(RetrievalError::UnknownField(field.clone()));
        }
        let matching: BTreeSet<&String> = index
            .fields
            .get(field)
            .and_then(|values| values.get(value))
            .into_iter()
            .flatten()
            .collect();
        docs = Some(match docs {
            Some(d) => d.intersection(&matching).copied().collect(),
            None => matching,
        });
    }
    let selected = index
        .doc_chunks
        .iter()
        .filter(|(doc, _)| docs.as_ref().is_none_or(|d| d.contains(doc)))
        .flat_map(|(_, chunks)| chunks.iter().cloned())
        .collect();
    Ok(selected)
}
