//! Structure-aware document model: the enriched tree a document is parsed
//! into, its cross-references, and the chunks derived from it.

mod ccd;
mod chunk;
mod xref;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ccd::{parse_ccd, to_ccd_json};
pub use chunk::{chunk_tree, serialize_grid, ChunkingPolicy};
pub use xref::extract_cross_references;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("document `{0}` has no text-bearing nodes")]
    EmptyDocument(String),
    #[error("invalid chunking policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentMetadata {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub doc_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_uri: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl DocumentMetadata {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: String::new(),
            doc_type: String::new(),
            version: None,
            author: None,
            source_uri: None,
            tags: BTreeMap::new(),
        }
    }

    /// `(field, value)` pairs as seen by the metadata space. Tags appear
    /// as `tags.<key>`.
    pub fn fields(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("doc_id".to_string(), self.doc_id.clone()),
            ("title".to_string(), self.title.clone()),
            ("doc_type".to_string(), self.doc_type.clone()),
        ];
        let optional = [
            ("version", &self.version),
            ("author", &self.author),
            ("source_uri", &self.source_uri),
        ];
        for (name, value) in optional {
            if let Some(v) = value {
                out.push((name.to_string(), v.clone()));
            }
        }
        for (k, v) in &self.tags {
            out.push((format!("tags.{k}"), v.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Section,
    Heading,
    Paragraph,
    Table,
    TableRow,
    TableCell,
    List,
    ListItem,
    Figure,
    Caption,
    FormField,
}

impl NodeKind {
    pub const ALL: [NodeKind; 11] = [
        NodeKind::Section,
        NodeKind::Heading,
        NodeKind::Paragraph,
        NodeKind::Table,
        NodeKind::TableRow,
        NodeKind::TableCell,
        NodeKind::List,
        NodeKind::ListItem,
        NodeKind::Figure,
        NodeKind::Caption,
        NodeKind::FormField,
    ];

    pub fn is_heading(self) -> bool {
        matches!(self, NodeKind::Section | NodeKind::Heading)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub text: String,
    pub children: Vec<DocumentNode>,
    /// Position among siblings, 0-based.
    pub ordinal: usize,
    /// Inclusive page range.
    pub page_span: Option<(u32, u32)>,
}

impl DocumentNode {
    /// Pre-order traversal.
    pub fn walk(&self) -> impl Iterator<Item = &DocumentNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Caption texts attached to a table or figure: the node's own text
    /// for tables, plus any `Caption` children.
    pub fn captions(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if self.kind == NodeKind::Table && !self.text.trim().is_empty() {
            out.push(self.text.as_str());
        }
        out.extend(
            self.children
                .iter()
                .filter(|c| c.kind == NodeKind::Caption && !c.text.trim().is_empty())
                .map(|c| c.text.as_str()),
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrossReference {
    pub from_node: String,
    pub ref_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_node: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentTree {
    pub metadata: DocumentMetadata,
    pub root: DocumentNode,
    pub cross_refs: Vec<CrossReference>,
}

impl DocumentTree {
    pub fn doc_id(&self) -> &str {
        &self.metadata.doc_id
    }

    pub fn node(&self, node_id: &str) -> Option<&DocumentNode> {
        self.root.walk().find(|n| n.node_id == node_id)
    }

    /// Nodes from the root down to `node_id`, both inclusive.
    pub fn path_to(&self, node_id: &str) -> Option<Vec<&DocumentNode>> {
        fn search<'a>(node: &'a DocumentNode, id: &str, path: &mut Vec<&'a DocumentNode>) -> bool {
            path.push(node);
            if node.node_id == id {
                return true;
            }
            for child in &node.children {
                if search(child, id, path) {
                    return true;
                }
            }
            path.pop();
            false
        }
        let mut path = Vec::new();
        search(&self.root, node_id, &mut path).then_some(path)
    }
}

/// Heading texts enclosing `node_id`, outermost first.
///
/// Only `Section` and `Heading` ancestors with non-empty text count; the
/// node itself is excluded.
pub fn heading_path(tree: &DocumentTree, node_id: &str) -> Result<Vec<String>, DocError> {
    let path = tree
        .path_to(node_id)
        .ok_or_else(|| DocError::UnknownNode(node_id.to_string()))?;
    Ok(breadcrumb_of(&path[..path.len() - 1]))
}

pub(crate) fn breadcrumb_of(ancestors: &[&DocumentNode]) -> Vec<String> {
    ancestors
        .iter()
        .filter(|n| n.kind.is_heading() && !n.text.trim().is_empty())
        .map(|n| n.text.trim().to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Table,
    Figure,
    Form,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Table => "table",
            Modality::Figure => "figure",
            Modality::Form => "form",
        }
    }
}

/// Retrieval unit shared by every space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// `doc_id#seq`
    pub chunk_id: String,
    pub doc_id: String,
    pub node_path: Vec<String>,
    pub text: String,
    /// Caption of a table or figure chunk, kept apart from `text` so a
    /// table chunk's text is exactly its grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub breadcrumb: Vec<String>,
    pub modality: Modality,
    pub token_estimate: usize,
    /// Kinds of the nodes along `node_path`.
    pub node_kinds: Vec<NodeKind>,
}

impl Chunk {
    pub fn source_node(&self) -> &str {
        self.node_path.last().map(String::as_str).unwrap_or_default()
    }

    /// Caption and text, as seen by the lexical and semantic spaces.
    pub fn searchable_text(&self) -> String {
        match &self.caption {
            Some(c) => format!("{c}\n{}", self.text),
            None => self.text.clone(),
        }
    }

    /// Single-block rendering handed to the synthesizer.
    pub fn context_text(&self) -> String {
        match (&self.caption, self.modality) {
            (Some(c), Modality::Figure) => format!("{}: {}", c.trim(), self.text.trim()),
            (Some(c), _) => format!("{}\n{}", c.trim(), self.text),
            (None, _) => self.text.clone(),
        }
    }
}
