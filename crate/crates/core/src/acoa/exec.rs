use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::coverage::{assess_coverage, missing_terms, CoverageAssessment};
use super::plan::{assemble_plan, revise_plan, with_filter, Action, LevelProfile, ReflectionConfig, RetrievalPlan};
use super::tools::{calculate, extract_expression, superlative, table_extreme, table_match};
use super::{classify_intent, classify_intent_with_llm, AcoaError, QueryIntent};
use crate::doc::{Chunk, Modality};
use crate::gateway::{ChatRequest, Gateway};
use crate::retrieval::{
    filter_metadata, fuse_rrf, search_lexical, search_semantic, search_structural, FusionConfig, Hits,
    RankedEvidence, RetrievalError, ScoredChunk, SpaceKind,
};
use crate::spaces::{Embedding, IndexBundle};
use crate::text::{content_terms, loose_terms};

/// Maximum evidence chunks passed to synthesis.
pub const DEFAULT_CONTEXT_BUDGET: usize = 8;

pub const SYNTHESIS_PROMPT: &str = "Answer the question using only the numbered context passages and tool \
results below. Quote the exact value or phrase that answers it. If the context does not contain the answer, \
say so.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcoaConfig {
    pub reflection: ReflectionConfig,
    pub fusion: FusionConfig,
    pub context_budget: usize,
    /// `field = value` conjunction applied from L2 up; empty disables it.
    pub metadata_filter: Vec<(String, String)>,
    /// Ask the chat model for the intent instead of the rule table.
    pub llm_intent: bool,
}

impl Default for AcoaConfig {
    fn default() -> Self {
        Self {
            reflection: ReflectionConfig::default(),
            fusion: FusionConfig::default(),
            context_budget: DEFAULT_CONTEXT_BUDGET,
            metadata_filter: Vec::new(),
            llm_intent: false,
        }
    }
}

impl AcoaConfig {
    pub fn validate(&self) -> Result<(), AcoaError> {
        self.reflection.validate()?;
        self.fusion.validate()?;
        if self.context_budget < 1 {
            return Err(AcoaError::InvalidConfig("context_budget must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u32,
    #[serde(flatten)]
    pub action: Action,
    /// `None` when the plan was not executed.
    pub result_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub citations: Vec<String>,
    pub plan_trace: Vec<TraceEntry>,
    pub profile: LevelProfile,
    pub intent: QueryIntent,
    pub tool_outputs: Vec<String>,
    pub iterations: u32,
}

/// Mutable state of one query's execution. Rankings accumulate across
/// reflection iterations, so the evidence set never shrinks.
struct Executor<'a> {
    query: &'a str,
    bundle: &'a IndexBundle,
    gateway: &'a Gateway,
    cfg: &'a AcoaConfig,
    intent: QueryIntent,
    rankings: BTreeMap<(SpaceKind, String), Hits>,
    embeddings: BTreeMap<String, Embedding>,
    expand: bool,
    allowed: Option<BTreeSet<String>>,
    tool_outputs: Vec<String>,
}

fn question_stem(query: &str) -> &str {
    query.trim().trim_end_matches(['?', '.', '!'])
}

impl<'a> Executor<'a> {
    fn new(query: &'a str, intent: QueryIntent, bundle: &'a IndexBundle, gateway: &'a Gateway, cfg: &'a AcoaConfig) -> Self {
        Self {
            query,
            bundle,
            gateway,
            cfg,
            intent,
            rankings: BTreeMap::new(),
            embeddings: BTreeMap::new(),
            expand: false,
            allowed: None,
            tool_outputs: Vec::new(),
        }
    }

    fn evidence(&self) -> RankedEvidence {
        let lists: Vec<(SpaceKind, Hits)> = self.rankings.iter().map(|((s, _), h)| (*s, h.clone())).collect();
        let mut ev = fuse_rrf(&lists, &self.cfg.fusion, self.query);
        if self.expand {
            expand_cross_refs(&mut ev, self.bundle);
        }
        if let Some(allowed) = &self.allowed {
            ev.items.retain(|c| allowed.contains(&c.chunk_id));
        }
        ev
    }

    fn context(&self) -> Vec<&'a Chunk> {
        context_chunks(&self.evidence(), self.bundle, self.cfg.context_budget)
    }

    fn embed(&mut self, text: &str) -> Result<Embedding, AcoaError> {
        if let Some(e) = self.embeddings.get(text) {
            return Ok(e.clone());
        }
        let e = self
            .gateway
            .embedder
            .embed(&[text.to_string()])?
            .into_iter()
            .next()
            .ok_or_else(|| AcoaError::Gateway(crate::gateway::GatewayError::MalformedResponse("no embedding".into())))?;
        self.embeddings.insert(text.to_string(), e.clone());
        Ok(e)
    }

    fn search(&mut self, space: SpaceKind, text: &str, k: usize) -> Result<Hits, AcoaError> {
        let depth = if self.allowed.is_some() { self.bundle.chunks.len().max(k) } else { k };
        let mut hits = match space {
            SpaceKind::Semantic => {
                let e = self.embed(text)?;
                search_semantic(&self.bundle.semantic, &e, depth)?
            }
            SpaceKind::Lexical => search_lexical(&self.bundle.lexical, text, depth)?,
            SpaceKind::Structural => search_structural(&self.bundle.structural, text, self.intent, depth)?,
            SpaceKind::Metadata => return Err(RetrievalError::InvalidK.into()),
        };
        if let Some(allowed) = &self.allowed {
            hits.retain(|(id, _)| allowed.contains(id));
            hits.truncate(k);
        }
        Ok(hits)
    }

    fn retrieve(&mut self, space: SpaceKind, k: usize, hop: u8) -> Result<usize, AcoaError> {
        let text = if hop == 0 {
            self.query.to_string()
        } else {
            missing_terms(self.query, &self.context()).join(" ")
        };
        if text.trim().is_empty() {
            return Ok(0);
        }
        let hits = self.search(space, &text, k)?;
        let n = hits.len();
        let slot = self.rankings.entry((space, text)).or_default();
        if hits.len() > slot.len() {
            *slot = hits;
        }
        Ok(n)
    }

    fn table_tool(&mut self, row_terms: &[String], col_terms: &[String]) -> Result<usize, AcoaError> {
        let derived = content_terms(self.query);
        let rows = if row_terms.is_empty() { &derived[..] } else { row_terms };
        let cols = if col_terms.is_empty() { &derived[..] } else { col_terms };
        let stem = question_stem(self.query);
        let extreme = superlative(self.query);
        let mut pick: Option<(String, usize)> = None;
        for chunk in self.context() {
            if chunk.modality != Modality::Table {
                continue;
            }
            let found = match extreme {
                Some(dir) => table_extreme(chunk, cols, dir)?.map(|(row, col, v)| {
                    let strength = loose_terms(&col).iter().filter(|t| cols.contains(t)).count();
                    (format!("{row} ({col} = {v})"), strength)
                }),
                None => table_match(chunk, rows, cols)?,
            };
            if let Some((value, strength)) = found {
                if pick.as_ref().is_none_or(|(_, b)| strength > *b) {
                    pick = Some((value, strength));
                }
            }
        }
        match pick {
            Some((value, _)) => {
                self.tool_outputs.push(format!("Table lookup result for {stem}: {value}."));
                Ok(1)
            }
            None => Ok(0),
        }
    }

    fn calc_tool(&mut self, expression: &str) -> Result<usize, AcoaError> {
        let stem = question_stem(self.query);
        let (expr, value) = if expression.trim().is_empty() {
            let Some(expr) = extract_expression(self.query) else { return Ok(0) };
            match calculate(&expr) {
                Ok(v) => (expr, v),
                Err(e) => {
                    log::warn!("skipping calculation extracted from the query: {e}");
                    return Ok(0);
                }
            }
        } else {
            (expression.to_string(), calculate(expression)?)
        };
        self.tool_outputs.push(format!("Calculation result for {stem}: {expr} = {value}."));
        Ok(1)
    }

    /// Run every action except Synthesize, appending to `trace`.
    fn run(&mut self, plan: &RetrievalPlan, trace: &mut Vec<TraceEntry>) -> Result<(), AcoaError> {
        self.tool_outputs.clear();
        for action in &plan.actions {
            let count = match action {
                Action::Synthesize => continue,
                Action::RetrieveSemantic { k, hop } => self.retrieve(SpaceKind::Semantic, *k, *hop)?,
                Action::RetrieveLexical { k, hop } => self.retrieve(SpaceKind::Lexical, *k, *hop)?,
                Action::RetrieveStructural { k, hop } => self.retrieve(SpaceKind::Structural, *k, *hop)?,
                Action::FilterMetadata { predicate } => {
                    let allowed = filter_metadata(&self.bundle.metadata, predicate)?;
                    let n = allowed.len();
                    self.allowed = Some(allowed);
                    n
                }
                Action::ExpandCrossRefs => {
                    let before = self.evidence().len();
                    self.expand = true;
                    self.evidence().len() - before
                }
                Action::TableLookup { row_terms, col_terms } => self.table_tool(row_terms, col_terms)?,
                Action::Calculate { expression } => self.calc_tool(expression)?,
            };
            trace.push(TraceEntry {
                iteration: plan.iteration,
                action: action.clone(),
                result_count: Some(count),
            });
        }
        Ok(())
    }
}

/// Add the chunks of every resolved cross-reference target of the current
/// evidence. Added chunks take the fused score of the chunk citing them and
/// carry structural provenance.
pub fn expand_cross_refs(evidence: &mut RankedEvidence, bundle: &IndexBundle) {
    let sources: Vec<(String, f64)> = evidence.items.iter().map(|c| (c.chunk_id.clone(), c.fused_score)).collect();
    for (source, score) in sources {
        for target in bundle.structural.links.get(&source).into_iter().flatten() {
            match evidence.items.iter_mut().find(|c| &c.chunk_id == target) {
                Some(existing) => {
                    existing.fused_score = existing.fused_score.max(score);
                    existing.provenance.insert(SpaceKind::Structural);
                }
                None => evidence.items.push(ScoredChunk {
                    chunk_id: target.clone(),
                    space_scores: BTreeMap::new(),
                    fused_score: score,
                    provenance: [SpaceKind::Structural].into_iter().collect(),
                }),
            }
        }
    }
    evidence.sort();
}

fn context_chunks<'a>(evidence: &RankedEvidence, bundle: &'a IndexBundle, budget: usize) -> Vec<&'a Chunk> {
    evidence.ids().filter_map(|id| bundle.chunk(id)).take(budget).collect()
}

/// User prompt handed to the synthesizer: tool results, numbered context
/// passages with their chunk id and breadcrumb, then the question.
pub fn build_prompt(query: &str, context: &[&Chunk], tool_outputs: &[String]) -> String {
    let mut out = String::from("CONTEXT:\n");
    for line in tool_outputs {
        out.push_str(line);
        out.push('\n');
    }
    for (i, chunk) in context.iter().enumerate() {
        out.push_str(&format!("[{}] {} | {}\n", i + 1, chunk.chunk_id, chunk.breadcrumb.join(" > ")));
        out.push_str(chunk.context_text().trim_end());
        out.push('\n');
    }
    out.push_str("\n\nQUESTION:\n");
    out.push_str(query.trim());
    out
}

/// Execute `plan` from a fresh state and return the evidence and tool
/// outputs it produced. Synthesize is not run.
pub fn execute_plan(
    plan: &RetrievalPlan,
    query: &str,
    bundle: &IndexBundle,
    gateway: &Gateway,
    cfg: &AcoaConfig,
) -> Result<(RankedEvidence, Vec<String>), AcoaError> {
    plan.validate()?;
    let mut exec = Executor::new(query, plan.intent, bundle, gateway, cfg);
    exec.run(plan, &mut Vec::new())?;
    Ok((exec.evidence(), exec.tool_outputs))
}

/// Classify, plan, execute, reflect (L4 only) and synthesize.
pub fn run_pipeline(
    query: &str,
    profile: LevelProfile,
    bundle: &IndexBundle,
    gateway: &Gateway,
    cfg: &AcoaConfig,
) -> Result<Answer, AcoaError> {
    run_pipeline_with(query, profile, bundle, gateway, cfg, &|q, ctx, tools, intent, rc| {
        assess_coverage(q, ctx, tools, intent, rc)
    })
}

type Assessor<'x> = dyn Fn(&str, &[&Chunk], &[String], QueryIntent, &ReflectionConfig) -> CoverageAssessment + 'x;

pub(crate) fn run_pipeline_with(
    query: &str,
    profile: LevelProfile,
    bundle: &IndexBundle,
    gateway: &Gateway,
    cfg: &AcoaConfig,
    assess: &Assessor<'_>,
) -> Result<Answer, AcoaError> {
    if query.trim().is_empty() {
        return Err(AcoaError::EmptyQuery);
    }
    if bundle.is_empty() {
        return Err(AcoaError::EmptyCorpus);
    }
    cfg.validate()?;
    let intent = if cfg.llm_intent {
        classify_intent_with_llm(query, gateway.chat.as_ref())?
    } else {
        classify_intent(query)?
    };
    let mut plan = with_filter(assemble_plan(intent, profile, &cfg.reflection), profile, &cfg.metadata_filter);
    plan.validate()?;

    let mut exec = Executor::new(query, intent, bundle, gateway, cfg);
    let mut trace = Vec::new();
    loop {
        exec.run(&plan, &mut trace)?;
        if !profile.reflects() {
            break;
        }
        let context = exec.context();
        let assessment = assess(query, &context, &exec.tool_outputs, intent, &cfg.reflection);
        log::debug!(
            "iteration {}: coverage {:.3}, intent satisfied {}",
            plan.iteration,
            assessment.term_coverage,
            assessment.intent_satisfied
        );
        if assessment.sufficient {
            break;
        }
        match revise_plan(&plan, &assessment, &cfg.reflection) {
            Some(next) => plan = next,
            None => break,
        }
    }

    let context = exec.context();
    let prompt = build_prompt(query, &context, &exec.tool_outputs);
    let reply = gateway.chat.chat(&ChatRequest::new(SYNTHESIS_PROMPT, prompt))?;
    let citations: Vec<String> = context.iter().map(|c| c.chunk_id.clone()).collect();
    trace.push(TraceEntry {
        iteration: plan.iteration,
        action: Action::Synthesize,
        result_count: Some(citations.len()),
    });
    Ok(Answer {
        text: reply.text.trim().to_string(),
        citations,
        plan_trace: trace,
        profile,
        intent,
        tool_outputs: exec.tool_outputs,
        iterations: plan.iteration + 1,
    })
}

/// Unexecuted trace of the initial plan, as printed by `explain-plan`.
pub fn explain_plan(query: &str, profile: LevelProfile, cfg: &AcoaConfig) -> Result<(QueryIntent, Vec<TraceEntry>), AcoaError> {
    let intent = classify_intent(query)?;
    let plan = with_filter(assemble_plan(intent, profile, &cfg.reflection), profile, &cfg.metadata_filter);
    let trace = plan
        .actions
        .into_iter()
        .map(|action| TraceEntry {
            iteration: 0,
            action,
            result_count: None,
        })
        .collect();
    Ok((intent, trace))
}
