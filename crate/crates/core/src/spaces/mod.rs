//! Mixture of Spaces: four parallel index views over one chunk set.
//!
//! | space      | keyed by                    | answers                        |
//! |------------|-----------------------------|--------------------------------|
//! | semantic   | chunk embedding             | meaning-level similarity       |
//! | lexical    | term postings (BM25 stats)  | keyword matches                |
//! | structural | breadcrumb terms, modality  | heading / layout lookups       |
//! | metadata   | document fields and tags    | equality filters               |
//!
//! The structural space also carries the cross-reference links between
//! chunks, which drive expansion at query time.

mod embed;
mod persist;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::doc::{to_ccd_json, Chunk, DocumentNode, DocumentTree, Modality, NodeKind};
use crate::gateway::{Embedder, GatewayError};
use crate::text::{content_terms, tokenize};

pub use embed::{mock_embed, EmbedderKind, EmbedderSpec, Embedding};
pub use persist::{load_bundle, persist_bundle, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("corpus has no chunks")]
    EmptyCorpus,
    #[error("chunk `{chunk_id}` belongs to unknown document `{doc_id}`")]
    UnknownDocument { chunk_id: String, doc_id: String },
    #[error("duplicate chunk id `{0}`")]
    DuplicateChunk(String),
    #[error("invalid embedder spec: dim must be >= 8, got {0}")]
    InvalidSpec(usize),
    #[error("embedding failed at chunk `{chunk_id}`: {source}")]
    EmbedderFailure {
        chunk_id: String,
        #[source]
        source: GatewayError,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticIndex {
    pub spec: EmbedderSpec,
    pub entries: BTreeMap<String, Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndex {
    /// term -> (chunk_id, term frequency), sorted by chunk_id.
    pub postings: BTreeMap<String, Vec<(String, u32)>>,
    pub doc_lengths: BTreeMap<String, u32>,
    pub avg_length: f64,
    pub total_chunks: usize,
}

impl LexicalIndex {
    pub fn build<'a>(docs: impl IntoIterator<Item = (&'a str, String)>) -> Self {
        let mut postings: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
        let mut doc_lengths = BTreeMap::new();
        for (chunk_id, text) in docs {
            let tokens = tokenize(&text);
            doc_lengths.insert(chunk_id.to_string(), tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term).or_default().push((chunk_id.to_string(), n));
            }
        }
        for list in postings.values_mut() {
            list.sort();
        }
        let total_chunks = doc_lengths.len();
        let avg_length = if total_chunks == 0 {
            0.0
        } else {
            doc_lengths.values().map(|&l| f64::from(l)).sum::<f64>() / total_chunks as f64
        };
        Self {
            postings,
            doc_lengths,
            avg_length,
            total_chunks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralEntry {
    pub doc_id: String,
    pub breadcrumb_terms: Vec<String>,
    pub node_kinds: Vec<NodeKind>,
    pub modality: Modality,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralIndex {
    pub entries: BTreeMap<String, StructuralEntry>,
    pub term_index: BTreeMap<String, BTreeSet<String>>,
    pub modality_index: BTreeMap<Modality, BTreeSet<String>>,
    /// Resolved cross-references: citing chunk -> chunks of the target node.
    pub links: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataIndex {
    /// field -> value -> doc_ids
    pub fields: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    pub doc_chunks: BTreeMap<String, BTreeSet<String>>,
}

impl MetadataIndex {
    /// Fields that are always indexed, even when no document sets them.
    pub const STANDARD_FIELDS: [&'static str; 6] =
        ["doc_id", "title", "doc_type", "version", "author", "source_uri"];

    pub fn knows_field(&self, field: &str) -> bool {
        Self::STANDARD_FIELDS.contains(&field) || self.fields.contains_key(field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub corpus_hash: String,
    pub chunk_count: usize,
    pub embedder: EmbedderSpec,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub format_version: u32,
    /// Digest of the configuration the index was built under, if recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

/// The four spaces, the chunk store they index, and a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBundle {
    pub semantic: SemanticIndex,
    pub lexical: LexicalIndex,
    pub structural: StructuralIndex,
    pub metadata: MetadataIndex,
    pub chunks: BTreeMap<String, Chunk>,
    pub manifest: IndexManifest,
}

impl IndexBundle {
    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.get(chunk_id)
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Bundle with no chunks, mostly useful for exercising error paths.
    pub fn empty(spec: EmbedderSpec) -> Self {
        Self {
            semantic: SemanticIndex {
                spec: spec.clone(),
                entries: BTreeMap::new(),
            },
            lexical: LexicalIndex::build(std::iter::empty()),
            structural: StructuralIndex {
                entries: BTreeMap::new(),
                term_index: BTreeMap::new(),
                modality_index: BTreeMap::new(),
                links: BTreeMap::new(),
            },
            metadata: MetadataIndex {
                fields: BTreeMap::new(),
                doc_chunks: BTreeMap::new(),
            },
            chunks: BTreeMap::new(),
            manifest: IndexManifest {
                corpus_hash: String::new(),
                chunk_count: 0,
                embedder: spec,
                created_at: 0,
                format_version: FORMAT_VERSION,
                config_digest: None,
            },
        }
    }

    /// Chunk id sets of the semantic, lexical, structural and metadata
    /// spaces, in that order.
    pub fn coverage(&self) -> [BTreeSet<&str>; 4] {
        [
            self.semantic.entries.keys().map(String::as_str).collect(),
            self.lexical.doc_lengths.keys().map(String::as_str).collect(),
            self.structural.entries.keys().map(String::as_str).collect(),
            self.metadata
                .doc_chunks
                .values()
                .flatten()
                .map(String::as_str)
                .collect(),
        ]
    }

    pub fn check_coverage(&self) -> Result<(), SpaceError> {
        let store: BTreeSet<&str> = self.chunks.keys().map(String::as_str).collect();
        let names = ["semantic", "lexical", "structural", "metadata"];
        for (name, set) in names.iter().zip(self.coverage()) {
            if set != store {
                return Err(SpaceError::CorruptIndex(format!(
                    "{name} space covers {} chunks, store has {}",
                    set.len(),
                    store.len()
                )));
            }
        }
        if self.manifest.chunk_count != store.len() {
            return Err(SpaceError::CorruptIndex(format!(
                "manifest chunk_count {} != {}",
                self.manifest.chunk_count,
                store.len()
            )));
        }
        Ok(())
    }
}

/// SHA-256 over the concatenated bytes, hex encoded.
pub fn digest_bytes<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn created_at_now() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return epoch;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Map each chunk to the chunks that hold the targets of its resolved
/// cross-references.
fn build_links(trees: &[DocumentTree], chunks: &[Chunk]) -> BTreeMap<String, Vec<String>> {
    let mut by_source: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    let mut by_doc: BTreeMap<&str, Vec<&Chunk>> = BTreeMap::new();
    for c in chunks {
        by_source.entry((&c.doc_id, c.source_node())).or_default().push(&c.chunk_id);
        by_doc.entry(&c.doc_id).or_default().push(c);
    }
    let mut links: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for tree in trees {
        let doc = tree.doc_id();
        let Some(doc_chunks) = by_doc.get(doc) else { continue };
        for xref in &tree.cross_refs {
            let Some(target) = &xref.target_node else { continue };
            // Citing chunks: the chunk sourced at the citing node or at its
            // nearest chunk-bearing ancestor (a cell cites from its table).
            let Some(path) = tree.path_to(&xref.from_node) else { continue };
            let citing = path
                .iter()
                .rev()
                .find_map(|n: &&DocumentNode| by_source.get(&(doc, n.node_id.as_str())));
            let Some(citing) = citing else { continue };
            // Target chunks: every chunk whose path passes through the target.
            let targets: Vec<&str> = doc_chunks
                .iter()
                .filter(|c| c.node_path.iter().any(|id| id == target))
                .map(|c| c.chunk_id.as_str())
                .collect();
            for &src in citing {
                let entry = links.entry(src.to_string()).or_default();
                entry.extend(targets.iter().filter(|&&t| t != src).map(|t| t.to_string()));
            }
        }
    }
    links
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Build all four spaces over `chunks`.
///
/// `trees` supplies document metadata and resolved cross-references; every
/// chunk's document must be among them. The manifest's corpus hash is the
/// digest of the trees' canonical CCD serialization; callers holding the
/// original file bytes may overwrite it.
pub fn build_indexes(
    chunks: &[Chunk],
    trees: &[DocumentTree],
    embedder: &dyn Embedder,
) -> Result<IndexBundle, SpaceError> {
    if chunks.is_empty() {
        return Err(SpaceError::EmptyCorpus);
    }
    let spec = embedder.spec().clone();
    if !spec.is_valid() {
        return Err(SpaceError::InvalidSpec(spec.dim));
    }
    let docs: BTreeMap<&str, &DocumentTree> = trees.iter().map(|t| (t.doc_id(), t)).collect();
    let mut store = BTreeMap::new();
    for c in chunks {
        if !docs.contains_key(c.doc_id.as_str()) {
            return Err(SpaceError::UnknownDocument {
                chunk_id: c.chunk_id.clone(),
                doc_id: c.doc_id.clone(),
            });
        }
        if store.insert(c.chunk_id.clone(), c.clone()).is_some() {
            return Err(SpaceError::DuplicateChunk(c.chunk_id.clone()));
        }
    }

    let mut entries = BTreeMap::new();
    for batch in chunks.chunks(crate::gateway::EMBED_BATCH_SIZE) {
        let texts: Vec<String> = batch.iter().map(Chunk::searchable_text).collect();
        let vectors = embedder.embed(&texts).map_err(|source| SpaceError::EmbedderFailure {
            chunk_id: batch[0].chunk_id.clone(),
            source,
        })?;
        if vectors.len() != batch.len() {
            return Err(SpaceError::EmbedderFailure {
                chunk_id: batch[0].chunk_id.clone(),
                source: GatewayError::MalformedResponse("embedding count mismatch".into()),
            });
        }
        for (c, v) in batch.iter().zip(vectors) {
            if v.dim() != spec.dim {
                return Err(SpaceError::EmbedderFailure {
                    chunk_id: c.chunk_id.clone(),
                    source: GatewayError::MalformedResponse(format!(
                        "dim {} != spec dim {}",
                        v.dim(),
                        spec.dim
                    )),
                });
            }
            entries.insert(c.chunk_id.clone(), v);
        }
    }

    let lexical = LexicalIndex::build(chunks.iter().map(|c| (c.chunk_id.as_str(), c.searchable_text())));

    let mut structural = StructuralIndex {
        entries: BTreeMap::new(),
        term_index: BTreeMap::new(),
        modality_index: BTreeMap::new(),
        links: build_links(trees, chunks),
    };
    for c in chunks {
        let terms = content_terms(&c.breadcrumb.join(" "));
        for t in &terms {
            structural.term_index.entry(t.clone()).or_default().insert(c.chunk_id.clone());
        }
        structural
            .modality_index
            .entry(c.modality)
            .or_default()
            .insert(c.chunk_id.clone());
        structural.entries.insert(
            c.chunk_id.clone(),
            StructuralEntry {
                doc_id: c.doc_id.clone(),
                breadcrumb_terms: terms,
                node_kinds: c.node_kinds.clone(),
                modality: c.modality,
                depth: c.node_path.len().saturating_sub(1),
            },
        );
    }

    let mut metadata = MetadataIndex {
        fields: BTreeMap::new(),
        doc_chunks: BTreeMap::new(),
    };
    for c in chunks {
        metadata
            .doc_chunks
            .entry(c.doc_id.clone())
            .or_default()
            .insert(c.chunk_id.clone());
    }
    for doc_id in metadata.doc_chunks.keys() {
        for (field, value) in docs[doc_id.as_str()].metadata.fields() {
            metadata
                .fields
                .entry(field)
                .or_default()
                .entry(value)
                .or_default()
                .insert(doc_id.clone());
        }
    }

    let canonical: Vec<String> = trees.iter().map(to_ccd_json).collect();
    let manifest = IndexManifest {
        corpus_hash: digest_bytes(canonical.iter().map(String::as_bytes)),
        chunk_count: store.len(),
        embedder: spec.clone(),
        created_at: created_at_now(),
        format_version: FORMAT_VERSION,
        config_digest: None,
    };
    Ok(IndexBundle {
        semantic: SemanticIndex { spec, entries },
        lexical,
        structural,
        metadata,
        chunks: store,
        manifest,
    })
}
