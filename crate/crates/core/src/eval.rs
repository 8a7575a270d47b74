//! Level-profiled evaluation over question datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acoa::{run_pipeline, AcoaConfig, LevelProfile};
use crate::gateway::{ChatModel, ChatRequest, Gateway, GatewayError};
use crate::spaces::IndexBundle;
use crate::text::{content_terms, normalize};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Rubric sent to the LLM judge as the system prompt.
pub const JUDGE_RUBRIC: &str = include_str!("../resources/judge_rubric.txt");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {message}")]
    Dataset { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no items in {0}")]
    EmptyDataset(String),
    #[error("judge failed: {0}")]
    Judge(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalItem {
    pub question: String,
    pub ground_truth: String,
    pub level: LevelProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_docs: Option<Vec<String>>,
}

impl EvalItem {
    pub fn validate(&self) -> Result<(), String> {
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        if self.ground_truth.trim().is_empty() {
            return Err("ground_truth is empty".into());
        }
        Ok(())
    }
}

/// Parse a JSON Lines dataset. Blank lines are skipped.
pub fn parse_dataset(raw: &str, path: &str) -> Result<Vec<EvalItem>, EvalError> {
    let mut items = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Dataset {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let item: EvalItem = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        item.validate().map_err(err)?;
        items.push(item);
    }
    if items.is_empty() {
        return Err(EvalError::EmptyDataset(path.to_string()));
    }
    Ok(items)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalItem>, EvalError> {
    let shown = path.display().to_string();
    let raw = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_dataset(&raw, &shown)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Lexical,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: f64,
    pub correct: bool,
    pub rationale: String,
    pub judge_kind: JudgeKind,
}

fn token_f1(ground_truth: &str, predicted: &str) -> f64 {
    let gt: BTreeSet<String> = content_terms(ground_truth).into_iter().collect();
    let pred: BTreeSet<String> = content_terms(predicted).into_iter().collect();
    let common = gt.intersection(&pred).count() as f64;
    if common == 0.0 {
        return 0.0;
    }
    let p = common / pred.len() as f64;
    let r = common / gt.len() as f64;
    2.0 * p * r / (p + r)
}

/// `max(F1 over content terms, 1.0 if the normalized ground truth occurs
/// in the normalized prediction at token boundaries)`.
pub fn judge_lexical_at(ground_truth: &str, predicted: &str, threshold: f64) -> JudgeVerdict {
    let f1 = token_f1(ground_truth, predicted);
    let contained = format!(" {} ", normalize(predicted)).contains(&format!(" {} ", normalize(ground_truth)));
    let (score, rationale) = if contained {
        (1.0, "ground truth contained in answer".to_string())
    } else {
        (f1, format!("content-term F1 {f1:.4}"))
    };
    JudgeVerdict {
        score,
        correct: score >= threshold,
        rationale,
        judge_kind: JudgeKind::Lexical,
    }
}

pub fn judge_lexical(ground_truth: &str, predicted: &str) -> JudgeVerdict {
    judge_lexical_at(ground_truth, predicted, DEFAULT_THRESHOLD)
}

fn first_integer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").expect("static regex"))
}

/// One chat call with the rubric; the first integer in the reply, which
/// must lie in 0..=100, divided by 100 is the score.
pub fn judge_llm(
    question: &str,
    ground_truth: &str,
    predicted: &str,
    chat: &dyn ChatModel,
    threshold: f64,
) -> Result<JudgeVerdict, GatewayError> {
    let prompt = format!("QUESTION:\n{question}\n\nREFERENCE:\n{ground_truth}\n\nCANDIDATE:\n{predicted}\n");
    let reply = chat.chat(&ChatRequest::new(JUDGE_RUBRIC, prompt))?;
    let m = first_integer()
        .find(&reply.text)
        .ok_or_else(|| GatewayError::MalformedResponse(format!("no score in judge reply `{}`", reply.text.trim())))?;
    let value: u32 = m
        .as_str()
        .parse()
        .ok()
        .filter(|v| *v <= 100)
        .ok_or_else(|| GatewayError::MalformedResponse(format!("score `{}` outside 0..=100", m.as_str())))?;
    let score = f64::from(value) / 100.0;
    Ok(JudgeVerdict {
        score,
        correct: score >= threshold,
        rationale: reply.text.trim().to_string(),
        judge_kind: JudgeKind::Llm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub acoa: AcoaConfig,
    pub judge: JudgeKind,
    pub threshold: f64,
    pub dataset: String,
    /// Digest of the caller's effective configuration. When `None` the
    /// digest of `acoa`, `judge` and `threshold` is used.
    pub config_digest: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            acoa: AcoaConfig::default(),
            judge: JudgeKind::Lexical,
            threshold: DEFAULT_THRESHOLD,
            dataset: "dataset".into(),
            config_digest: None,
        }
    }
}

impl EvalOptions {
    fn digest(&self) -> String {
        if let Some(d) = &self.config_digest {
            return d.clone();
        }
        let v = serde_json::json!({"acoa": self.acoa, "judge": self.judge, "threshold": self.threshold});
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub profile: LevelProfile,
    pub index: usize,
    pub level: LevelProfile,
    pub question: String,
    pub ground_truth: String,
    pub answer: Option<String>,
    pub citations: Vec<String>,
    pub score: f64,
    pub correct: bool,
    pub judge_rationale: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelBreakdown {
    pub items: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub dataset: String,
    pub profile: LevelProfile,
    pub items: usize,
    pub correct: usize,
    pub errors: usize,
    pub accuracy: f64,
    pub mean_score: f64,
    pub by_level: BTreeMap<LevelProfile, LevelBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub corpus_hash: String,
    pub judge_kind: JudgeKind,
    pub threshold: f64,
    pub dataset: String,
    pub item_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub manifest: RunManifest,
    pub summaries: Vec<ProfileSummary>,
    pub results: Vec<ItemResult>,
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

fn evaluate_one(
    item: &EvalItem,
    index: usize,
    profile: LevelProfile,
    bundle: &IndexBundle,
    gateway: &Gateway,
    opts: &EvalOptions,
) -> ItemResult {
    let mut result = ItemResult {
        profile,
        index,
        level: item.level,
        question: item.question.clone(),
        ground_truth: item.ground_truth.clone(),
        answer: None,
        citations: Vec::new(),
        score: 0.0,
        correct: false,
        judge_rationale: String::new(),
        error: None,
    };
    let answer = match run_pipeline(&item.question, profile, bundle, gateway, &opts.acoa) {
        Ok(a) => a,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let verdict = match opts.judge {
        JudgeKind::Lexical => Ok(judge_lexical_at(&item.ground_truth, &answer.text, opts.threshold)),
        JudgeKind::Llm => judge_llm(
            &item.question,
            &item.ground_truth,
            &answer.text,
            gateway.chat.as_ref(),
            opts.threshold,
        ),
    };
    result.answer = Some(answer.text);
    result.citations = answer.citations;
    match verdict {
        Ok(v) => {
            result.score = v.score;
            result.correct = v.correct;
            result.judge_rationale = v.rationale;
        }
        Err(e) => result.error = Some(format!("judge: {e}")),
    }
    result
}

/// Run every `(profile, item)` pair, judge it and aggregate. Pairs run in
/// parallel; results are ordered by profile, then item index. A failing
/// pair is recorded with its error and counted as incorrect.
pub fn run_eval(
    items: &[EvalItem],
    profiles: &[LevelProfile],
    bundle: &IndexBundle,
    gateway: &Gateway,
    opts: &EvalOptions,
) -> EvalReport {
    let mut profiles = profiles.to_vec();
    profiles.sort();
    profiles.dedup();
    let pairs: Vec<(LevelProfile, usize)> = profiles
        .iter()
        .flat_map(|&p| (0..items.len()).map(move |i| (p, i)))
        .collect();
    let results: Vec<ItemResult> = pairs
        .par_iter()
        .map(|&(p, i)| evaluate_one(&items[i], i, p, bundle, gateway, opts))
        .collect();

    let summaries = profiles
        .iter()
        .map(|&profile| {
            let rows: Vec<&ItemResult> = results.iter().filter(|r| r.profile == profile).collect();
            let correct = rows.iter().filter(|r| r.correct).count();
            let mut by_level: BTreeMap<LevelProfile, LevelBreakdown> = BTreeMap::new();
            for r in &rows {
                let b = by_level.entry(r.level).or_default();
                b.items += 1;
                b.correct += usize::from(r.correct);
            }
            for b in by_level.values_mut() {
                b.accuracy = percent(b.correct, b.items);
            }
            ProfileSummary {
                dataset: opts.dataset.clone(),
                profile,
                items: rows.len(),
                correct,
                errors: rows.iter().filter(|r| r.error.is_some()).count(),
                accuracy: percent(correct, rows.len()),
                mean_score: if rows.is_empty() {
                    0.0
                } else {
                    rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64
                },
                by_level,
            }
        })
        .collect();

    EvalReport {
        manifest: RunManifest {
            config_digest: opts.digest(),
            corpus_hash: bundle.manifest.corpus_hash.clone(),
            judge_kind: opts.judge,
            threshold: opts.threshold,
            dataset: opts.dataset.clone(),
            item_count: items.len(),
        },
        summaries,
        results,
    }
}

impl EvalReport {
    pub fn summary(&self, profile: LevelProfile) -> Option<&ProfileSummary> {
        self.summaries.iter().find(|s| s.profile == profile)
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialize");
        s.push('\n');
        s
    }

    /// Aligned plain-text table: one row per profile, then per-level
    /// accuracy columns.
    pub fn to_text(&self) -> String {
        let levels: BTreeSet<LevelProfile> = self.results.iter().map(|r| r.level).collect();
        let mut header = vec![
            "dataset".to_string(),
            "profile".into(),
            "items".into(),
            "correct".into(),
            "accuracy".into(),
            "mean_score".into(),
            "errors".into(),
        ];
        header.extend(levels.iter().map(|l| format!("acc_{l}")));
        let mut rows = vec![header];
        for s in &self.summaries {
            let mut row = vec![
                s.dataset.clone(),
                s.profile.to_string(),
                s.items.to_string(),
                s.correct.to_string(),
                format!("{:.2}", s.accuracy),
                format!("{:.4}", s.mean_score),
                s.errors.to_string(),
            ];
            row.extend(
                levels
                    .iter()
                    .map(|l| s.by_level.get(l).map_or("-".to_string(), |b| format!("{:.2}", b.accuracy))),
            );
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(
            out,
            "judge={} threshold={} corpus={} config={}",
            serde_json::to_value(self.manifest.judge_kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            self.manifest.threshold,
            short(&self.manifest.corpus_hash),
            short(&self.manifest.config_digest)
        );
        out
    }
}

fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockChat, MockPolicy};
    use crate::spaces::EmbedderSpec;

    #[test]
    fn lexical_examples() {
        let v = judge_lexical("Diesel Exhaust Fluid", "DEF stands for Diesel Exhaust Fluid");
        assert_eq!(v.score, 1.0);
        assert!(v.correct);
        assert_eq!(judge_lexical("same answer", "same answer").score, 1.0);
        let v = judge_lexical("Growth Portfolio", "the debt table");
        assert_eq!(v.score, 0.0);
        assert!(!v.correct);
        assert_eq!(judge_lexical("≈0.11%", "The value is 0.11.").score, 1.0);
        // Containment respects token boundaries.
        assert!(judge_lexical("0.1", "0.11").score < 1.0);
    }

    #[test]
    fn f1_partial() {
        // gt {growth, portfolio}, pred {growth, fund}: p = r = 1/2.
        let v = judge_lexical("Growth Portfolio", "growth fund");
        assert!((v.score - 0.5).abs() < 1e-12);
        assert!(v.correct);
    }

    #[test]
    fn llm_parse() {
        let v = judge_llm("q", "g", "p", &MockChat::new(MockPolicy::Fixed("87".into())), 0.5).unwrap();
        assert!((v.score - 0.87).abs() < 1e-12);
        assert!(v.correct);
        let v = judge_llm("q", "g", "p", &MockChat::new(MockPolicy::Fixed("0".into())), 0.5).unwrap();
        assert_eq!(v.score, 0.0);
        assert!(!v.correct);
        let e = judge_llm("q", "g", "p", &MockChat::new(MockPolicy::Fixed("excellent answer".into())), 0.5);
        assert!(matches!(e, Err(GatewayError::MalformedResponse(_))));
        let e = judge_llm("q", "g", "p", &MockChat::new(MockPolicy::Fixed("250".into())), 0.5);
        assert!(matches!(e, Err(GatewayError::MalformedResponse(_))));
    }

    #[test]
    fn dataset_parsing() {
        let raw = "{\"question\":\"q\",\"ground_truth\":\"g\",\"level\":\"L1\"}\n\n{\"question\":\"q2\",\"ground_truth\":\"g2\",\"level\":\"L4\",\"rationale\":\"r\",\"source_docs\":[\"d\"]}\n";
        let items = parse_dataset(raw, "x.jsonl").unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].level, LevelProfile::L4);
        let err = parse_dataset("{\"question\":\"\",\"ground_truth\":\"g\",\"level\":\"L1\"}", "x.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("x.jsonl:1:"));
        assert!(parse_dataset("{\"question\":\"q\",\"ground_truth\":\"g\",\"level\":\"L9\"}", "x").is_err());
        assert!(parse_dataset("\n", "x").is_err());
    }

    #[test]
    fn errors_are_isolated() {
        let items = vec![EvalItem {
            question: "What is the DEF?".into(),
            ground_truth: "Diesel Exhaust Fluid".into(),
            level: LevelProfile::L1,
            rationale: None,
            source_docs: None,
        }];
        let bundle = IndexBundle::empty(EmbedderSpec::mock(32));
        let gw = Gateway::mock(MockPolicy::ExtractiveSynthesis, 32);
        let r = run_eval(&items, &[LevelProfile::L1], &bundle, &gw, &EvalOptions::default());
        assert_eq!(r.results.len(), 1);
        assert!(r.results[0].error.as_deref().unwrap().contains("no chunks"));
        assert_eq!(r.summaries[0].accuracy, 0.0);
        assert_eq!(r.summaries[0].errors, 1);
        assert!(r.to_text().contains("L1"));
    }
}
