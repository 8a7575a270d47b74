//! Pipeline configuration file (TOML).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use polyview_core::acoa::{AcoaConfig, LevelProfile, ReflectionConfig, DEFAULT_CONTEXT_BUDGET};
use polyview_core::doc::ChunkingPolicy;
use polyview_core::eval::{JudgeKind, DEFAULT_THRESHOLD};
use polyview_core::gateway::ProviderConfig;
use polyview_core::retrieval::FusionConfig;
use polyview_core::spaces::EmbedderSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub profile: LevelProfile,
    /// Use the offline mock chat model and mock embeddings.
    pub mock_llm: bool,
    pub judge: JudgeKind,
    pub threshold: f64,
    pub context_budget: usize,
    pub llm_intent: bool,
    pub corpus_dir: Option<PathBuf>,
    pub index_dir: PathBuf,
    /// `field = value` pairs every retrieved chunk's document must match.
    pub metadata_filter: BTreeMap<String, String>,
    pub fusion: FusionConfig,
    pub reflection: ReflectionConfig,
    pub chunking: ChunkingPolicy,
    pub embedder: EmbedderSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gateway: Option<ProviderConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            profile: LevelProfile::L4,
            mock_llm: false,
            judge: JudgeKind::Lexical,
            threshold: DEFAULT_THRESHOLD,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            llm_intent: false,
            corpus_dir: None,
            index_dir: PathBuf::from("index"),
            metadata_filter: BTreeMap::new(),
            fusion: FusionConfig::default(),
            reflection: ReflectionConfig::default(),
            chunking: ChunkingPolicy::default(),
            embedder: EmbedderSpec::default(),
            gateway: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let raw = fs::read_to_string(path).map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
        Self::parse(&raw).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
    }

    pub fn parse(raw: &str) -> Result<Self, String> {
        toml::from_str(raw).map_err(|e| e.message().to_string())
    }

    /// Set one leaf by dotted path, e.g. `reflection.max_iters=2`. The value
    /// is read as a TOML literal, falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<(), Failure> {
        self.apply_overrides(&[assignment])
    }

    /// Apply several `key=value` assignments, then re-read the config once,
    /// so a new table such as `gateway` can be filled one leaf at a time.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<(), Failure> {
        if assignments.is_empty() {
            return Ok(());
        }
        let mut tree = toml::Value::try_from(&*self).map_err(|e| Failure::User(e.to_string()))?;
        for assignment in assignments {
            let assignment = assignment.as_ref();
            let (path, raw) = assignment
                .split_once('=')
                .ok_or_else(|| Failure::User(format!("--set expects key=value, got `{assignment}`")))?;
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let keys: Vec<&str> = path.trim().split('.').collect();
            let mut node = &mut tree;
            for key in &keys[..keys.len() - 1] {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Failure::User(format!("`{path}` does not name a config table")))?;
                node = table
                    .entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            }
            node.as_table_mut()
                .ok_or_else(|| Failure::User(format!("`{path}` does not name a config table")))?
                .insert(keys[keys.len() - 1].to_string(), value);
        }
        *self = tree.try_into().map_err(|e: toml::de::Error| {
            let joined: Vec<&str> = assignments.iter().map(AsRef::as_ref).collect();
            Failure::User(format!("--set {}: {}", joined.join(" "), e.message()))
        })?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.acoa().validate().map_err(|e| Failure::User(e.to_string()))?;
        self.chunking.validate().map_err(|e| Failure::User(e.to_string()))?;
        if !self.embedder.is_valid() {
            return Err(Failure::User(format!("embedder.dim must be >= 8, got {}", self.embedder.dim)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Failure::User("threshold must be in [0, 1]".into()));
        }
        if let Some(g) = &self.gateway {
            g.validate().map_err(|e| Failure::User(e.to_string()))?;
        }
        Ok(())
    }

    pub fn acoa(&self) -> AcoaConfig {
        AcoaConfig {
            reflection: self.reflection.clone(),
            fusion: self.fusion.clone(),
            context_budget: self.context_budget,
            metadata_filter: self.metadata_filter.clone().into_iter().collect(),
            llm_intent: self.llm_intent,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }

    /// SHA-256 of the canonical (sorted-key) JSON of every setting that
    /// affects results. Paths are excluded so relocated runs compare equal.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("corpus_dir");
            map.remove("index_dir");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
