use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Hits, RetrievalError, SpaceKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub rrf_k: u32,
    pub space_weights: BTreeMap<SpaceKind, f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            rrf_k: 60,
            space_weights: SpaceKind::ALL.iter().map(|&s| (s, 1.0)).collect(),
        }
    }
}

impl FusionConfig {
    /// Weight of `space`; spaces missing from the map weigh 1.0.
    pub fn weight(&self, space: SpaceKind) -> f64 {
        self.space_weights.get(&space).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.rrf_k < 1 {
            return Err(RetrievalError::InvalidFusion("rrf_k must be >= 1".into()));
        }
        if self.space_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RetrievalError::InvalidFusion("weights must be finite and >= 0".into()));
        }
        if SpaceKind::ALL.iter().all(|&s| self.weight(s) == 0.0) {
            return Err(RetrievalError::InvalidFusion("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    /// Best raw score each contributing space gave this chunk.
    pub space_scores: BTreeMap<SpaceKind, f64>,
    pub fused_score: f64,
    pub provenance: BTreeSet<SpaceKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvidence {
    pub items: Vec<ScoredChunk>,
    pub query_echo: String,
}

impl RankedEvidence {
    pub fn empty(query: &str) -> Self {
        Self {
            items: Vec::new(),
            query_echo: query.to_string(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|c| c.chunk_id.as_str())
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.items.iter().any(|c| c.chunk_id == chunk_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Restore the (fused score desc, chunk id asc) order.
    pub fn sort(&mut self) {
        self.items.sort_by(|a, b| {
            b.fused_score
                .total_cmp(&a.fused_score)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
    }
}

/// Weighted reciprocal rank fusion:
/// `fused(c) = sum over lists of weight(space) / (rrf_k + rank(c))`, with
/// 1-based ranks and no contribution from lists that miss `c`.
///
/// A space may contribute several lists (e.g. two retrieval hops). Within
/// one list only the first occurrence of a chunk counts.
pub fn fuse_rrf(rankings: &[(SpaceKind, Hits)], cfg: &FusionConfig, query: &str) -> RankedEvidence {
    let k = f64::from(cfg.rrf_k.max(1));
    let mut acc: BTreeMap<&str, ScoredChunk> = BTreeMap::new();
    for (space, hits) in rankings {
        let weight = cfg.weight(*space);
        let mut seen = BTreeSet::new();
        for (rank0, (chunk_id, score)) in hits.iter().enumerate() {
            if !seen.insert(chunk_id.as_str()) {
                continue;
            }
            let entry = acc.entry(chunk_id).or_insert_with(|| ScoredChunk {
                chunk_id: chunk_id.clone(),
                space_scores: BTreeMap::new(),
                fused_score: 0.0,
                provenance: BTreeSet::new(),
            });
            entry.fused_score += weight / (k + (rank0 + 1) as f64);
            entry.provenance.insert(*space);
            let best = entry.space_scores.entry(*space).or_insert(*score);
            if *score > *best {
                *best = *score;
            }
        }
    }
    let mut evidence = RankedEvidence {
        items: acc.into_values().collect(),
        query_echo: query.to_string(),
    };
    evidence.sort();
    evidence
}
