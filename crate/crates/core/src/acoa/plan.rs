use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AcoaError, CoverageAssessment, QueryIntent};
use crate::retrieval::SpaceKind;

/// Retrieval depth used by every template.
pub const DEFAULT_K: usize = 5;

fn is_zero(n: &u8) -> bool {
    *n == 0
}

/// One step of a plan.
///
/// `hop` on retrieval actions is 0 for the user query. A later hop
/// retrieves with the query terms the evidence gathered so far still lacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "params", rename_all = "snake_case")]
pub enum Action {
    RetrieveSemantic {
        k: usize,
        #[serde(default, skip_serializing_if = "is_zero")]
        hop: u8,
    },
    RetrieveLexical {
        k: usize,
        #[serde(default, skip_serializing_if = "is_zero")]
        hop: u8,
    },
    RetrieveStructural {
        k: usize,
        #[serde(default, skip_serializing_if = "is_zero")]
        hop: u8,
    },
    FilterMetadata {
        predicate: Vec<(String, String)>,
    },
    ExpandCrossRefs,
    /// Empty term lists are derived from the query.
    TableLookup {
        row_terms: Vec<String>,
        col_terms: Vec<String>,
    },
    /// An empty expression is extracted from the query.
    Calculate {
        expression: String,
    },
    Synthesize,
}

impl Action {
    pub fn retrieve(space: SpaceKind, k: usize, hop: u8) -> Option<Action> {
        match space {
            SpaceKind::Semantic => Some(Action::RetrieveSemantic { k, hop }),
            SpaceKind::Lexical => Some(Action::RetrieveLexical { k, hop }),
            SpaceKind::Structural => Some(Action::RetrieveStructural { k, hop }),
            SpaceKind::Metadata => None,
        }
    }

    /// `(space, k, hop)` for retrieval actions.
    pub fn retrieval(&self) -> Option<(SpaceKind, usize, u8)> {
        match *self {
            Action::RetrieveSemantic { k, hop } => Some((SpaceKind::Semantic, k, hop)),
            Action::RetrieveLexical { k, hop } => Some((SpaceKind::Lexical, k, hop)),
            Action::RetrieveStructural { k, hop } => Some((SpaceKind::Structural, k, hop)),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Action::RetrieveSemantic { .. } => "retrieve_semantic",
            Action::RetrieveLexical { .. } => "retrieve_lexical",
            Action::RetrieveStructural { .. } => "retrieve_structural",
            Action::FilterMetadata { .. } => "filter_metadata",
            Action::ExpandCrossRefs => "expand_cross_refs",
            Action::TableLookup { .. } => "table_lookup",
            Action::Calculate { .. } => "calculate",
            Action::Synthesize => "synthesize",
        }
    }

    pub fn is_tool(&self) -> bool {
        matches!(self, Action::TableLookup { .. } | Action::Calculate { .. })
    }

    /// Execution phase; plans keep actions sorted by it.
    fn phase(&self) -> u8 {
        match self {
            Action::FilterMetadata { .. } => 0,
            Action::RetrieveSemantic { hop, .. }
            | Action::RetrieveLexical { hop, .. }
            | Action::RetrieveStructural { hop, .. } => {
                if *hop == 0 {
                    1
                } else {
                    3
                }
            }
            Action::ExpandCrossRefs => 2,
            Action::TableLookup { .. } => 4,
            Action::Calculate { .. } => 5,
            Action::Synthesize => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LevelProfile {
    #[serde(alias = "l1")]
    L1,
    #[serde(alias = "l2")]
    L2,
    #[serde(alias = "l3")]
    L3,
    #[serde(alias = "l4")]
    L4,
}

impl LevelProfile {
    pub const ALL: [LevelProfile; 4] = [LevelProfile::L1, LevelProfile::L2, LevelProfile::L3, LevelProfile::L4];

    pub fn reflects(self) -> bool {
        self == LevelProfile::L4
    }
}

impl fmt::Display for LevelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for LevelProfile {
    type Err = AcoaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LevelProfile::L1),
            "l2" => Ok(LevelProfile::L2),
            "l3" => Ok(LevelProfile::L3),
            "l4" => Ok(LevelProfile::L4),
            _ => Err(AcoaError::InvalidConfig(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionConfig {
    pub max_iters: u32,
    pub coverage_threshold: f64,
    pub k_growth: usize,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        Self {
            max_iters: 3,
            coverage_threshold: 0.6,
            k_growth: 2,
        }
    }
}

impl ReflectionConfig {
    pub fn validate(&self) -> Result<(), AcoaError> {
        if self.max_iters < 1 {
            return Err(AcoaError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return Err(AcoaError::InvalidConfig("coverage_threshold must be in (0, 1]".into()));
        }
        if self.k_growth < 1 {
            return Err(AcoaError::InvalidConfig("k_growth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalPlan {
    pub actions: Vec<Action>,
    pub intent: QueryIntent,
    pub iteration: u32,
}

impl RetrievalPlan {
    pub fn validate(&self) -> Result<(), AcoaError> {
        let synth = self.actions.iter().filter(|a| **a == Action::Synthesize).count();
        if synth != 1 || self.actions.last() != Some(&Action::Synthesize) {
            return Err(AcoaError::InvalidPlan("Synthesize must appear once, last".into()));
        }
        if self.actions.iter().any(|a| a.retrieval().is_some_and(|(_, k, _)| k == 0)) {
            return Err(AcoaError::InvalidPlan("retrieval k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn spaces(&self) -> Vec<SpaceKind> {
        let mut out: Vec<SpaceKind> = self.actions.iter().filter_map(|a| a.retrieval()).map(|r| r.0).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn has(&self, kind: &str) -> bool {
        self.actions.iter().any(|a| a.kind() == kind)
    }

    fn normalize(&mut self) {
        self.actions.sort_by_key(Action::phase);
    }
}

/// Fixed plan template for `(intent, profile)`.
///
/// | profile | actions |
/// |---|---|
/// | L1 | semantic, synthesize |
/// | L2 | semantic, lexical, structural, synthesize |
/// | L3 | L2 + cross-ref expansion; MultiHop adds a semantic and lexical second hop |
/// | L4 | L3 + table lookup (TableLookup, Computation) + calculate (Computation) |
pub fn assemble_plan(intent: QueryIntent, profile: LevelProfile, _cfg: &ReflectionConfig) -> RetrievalPlan {
    let k = DEFAULT_K;
    let mut actions = vec![Action::RetrieveSemantic { k, hop: 0 }];
    if profile >= LevelProfile::L2 {
        actions.push(Action::RetrieveLexical { k, hop: 0 });
        actions.push(Action::RetrieveStructural { k, hop: 0 });
    }
    if profile >= LevelProfile::L3 {
        actions.push(Action::ExpandCrossRefs);
        if intent == QueryIntent::MultiHop {
            actions.push(Action::RetrieveSemantic { k, hop: 1 });
            actions.push(Action::RetrieveLexical { k, hop: 1 });
        }
    }
    if profile >= LevelProfile::L4 && intent.needs_table() {
        actions.push(Action::TableLookup {
            row_terms: Vec::new(),
            col_terms: Vec::new(),
        });
        if intent == QueryIntent::Computation {
            actions.push(Action::Calculate {
                expression: String::new(),
            });
        }
    }
    actions.push(Action::Synthesize);
    RetrievalPlan {
        actions,
        intent,
        iteration: 0,
    }
}

/// Prepend a metadata filter to a plan (profiles L2 and up).
pub fn with_filter(mut plan: RetrievalPlan, profile: LevelProfile, predicate: &[(String, String)]) -> RetrievalPlan {
    if !predicate.is_empty() && profile >= LevelProfile::L2 {
        plan.actions.insert(
            0,
            Action::FilterMetadata {
                predicate: predicate.to_vec(),
            },
        );
    }
    plan
}

/// Next plan after an insufficient pass, or `None` once the iteration
/// budget is spent.
///
/// Every applicable rule is applied, in this order: add unused spaces,
/// grow every retrieval k by `k_growth`, add cross-ref expansion, add a
/// table lookup when the intent needs a table and none was found.
pub fn revise_plan(
    plan: &RetrievalPlan,
    assessment: &CoverageAssessment,
    cfg: &ReflectionConfig,
) -> Option<RetrievalPlan> {
    if plan.iteration + 1 >= cfg.max_iters {
        return None;
    }
    let mut next = plan.clone();
    next.iteration += 1;

    let base_k = plan
        .actions
        .iter()
        .filter_map(|a| a.retrieval())
        .map(|r| r.1)
        .max()
        .unwrap_or(DEFAULT_K);
    let used = plan.spaces();
    for space in [SpaceKind::Semantic, SpaceKind::Lexical, SpaceKind::Structural] {
        if !used.contains(&space) {
            next.actions.extend(Action::retrieve(space, base_k, 0));
        }
    }

    for action in &mut next.actions {
        match action {
            Action::RetrieveSemantic { k, .. } | Action::RetrieveLexical { k, .. } | Action::RetrieveStructural { k, .. } => {
                *k = k.saturating_mul(cfg.k_growth.max(1));
            }
            _ => {}
        }
    }

    if !next.has("expand_cross_refs") {
        next.actions.push(Action::ExpandCrossRefs);
    }

    if plan.intent.needs_table() && !assessment.intent_satisfied && !next.has("table_lookup") {
        next.actions.push(Action::TableLookup {
            row_terms: Vec::new(),
            col_terms: Vec::new(),
        });
    }

    next.normalize();
    Some(next)
}
