use serde::{Deserialize, Serialize};

use super::{breadcrumb_of, Chunk, DocError, DocumentNode, DocumentTree, Modality, NodeKind};
use crate::text::{split_sentences, token_estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkingPolicy {
    pub max_tokens_per_chunk: usize,
    pub table_as_single_chunk: bool,
    pub attach_caption_to_figure: bool,
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        Self {
            max_tokens_per_chunk: 256,
            table_as_single_chunk: true,
            attach_caption_to_figure: true,
        }
    }
}

impl ChunkingPolicy {
    pub fn validate(&self) -> Result<(), DocError> {
        if self.max_tokens_per_chunk < 16 {
            return Err(DocError::InvalidPolicy(format!(
                "max_tokens_per_chunk must be >= 16, got {}",
                self.max_tokens_per_chunk
            )));
        }
        Ok(())
    }
}

/// Rows joined by newlines, cells by `" | "`. The first row is the header.
pub fn serialize_grid(table: &DocumentNode) -> String {
    table
        .children
        .iter()
        .filter(|c| c.kind == NodeKind::TableRow)
        .map(serialize_row)
        .collect::<Vec<_>>()
        .join("\n")
}

fn serialize_row(row: &DocumentNode) -> String {
    row.children
        .iter()
        .map(|c| c.text.replace('\n', " "))
        .collect::<Vec<_>>()
        .join(" | ")
}

/// Greedy sentence packing. A single sentence is never split.
fn split_paragraph(text: &str, max_tokens: usize) -> Vec<String> {
    if token_estimate(text) <= max_tokens {
        return vec![text.to_string()];
    }
    let mut out = Vec::new();
    let mut buf = String::new();
    for sentence in split_sentences(text) {
        if !buf.is_empty() && token_estimate(&format!("{buf}{sentence}")) > max_tokens {
            out.push(std::mem::take(&mut buf));
        }
        buf.push_str(sentence);
    }
    if !buf.is_empty() {
        out.push(buf);
    }
    out
}

struct Emitter<'a> {
    tree: &'a DocumentTree,
    policy: &'a ChunkingPolicy,
    chunks: Vec<Chunk>,
}

impl Emitter<'_> {
    fn emit(
        &mut self,
        path: &[&DocumentNode],
        text: String,
        caption: Option<String>,
        modality: Modality,
    ) {
        let seq = self.chunks.len();
        let estimate = token_estimate(&text);
        self.chunks.push(Chunk {
            chunk_id: format!("{}#{seq}", self.tree.doc_id()),
            doc_id: self.tree.doc_id().to_string(),
            node_path: path.iter().map(|n| n.node_id.clone()).collect(),
            text,
            caption,
            breadcrumb: breadcrumb_of(&path[..path.len() - 1]),
            modality,
            token_estimate: estimate,
            node_kinds: path.iter().map(|n| n.kind).collect(),
        });
    }

    fn visit<'n>(&mut self, node: &'n DocumentNode, path: &mut Vec<&'n DocumentNode>) {
        path.push(node);
        match node.kind {
            NodeKind::Paragraph | NodeKind::ListItem | NodeKind::FormField => {
                if !node.text.is_empty() {
                    let modality = if node.kind == NodeKind::FormField {
                        Modality::Form
                    } else {
                        Modality::Text
                    };
                    for piece in split_paragraph(&node.text, self.policy.max_tokens_per_chunk) {
                        self.emit(path, piece, None, modality);
                    }
                }
                self.children(node, path);
            }
            NodeKind::Table => self.table(node, path),
            NodeKind::Figure if self.policy.attach_caption_to_figure => {
                let captions = node.captions().join(" ");
                let caption = (!captions.is_empty()).then_some(captions);
                match (node.text.is_empty(), caption) {
                    (false, caption) => self.emit(path, node.text.clone(), caption, Modality::Figure),
                    (true, Some(c)) => self.emit(path, c, None, Modality::Figure),
                    (true, None) => {}
                }
                for child in node.children.iter().filter(|c| c.kind != NodeKind::Caption) {
                    self.visit(child, path);
                }
            }
            NodeKind::Figure => {
                if !node.text.is_empty() {
                    self.emit(path, node.text.clone(), None, Modality::Figure);
                }
                self.children(node, path);
            }
            NodeKind::Caption => {
                if !node.text.is_empty() {
                    let parent_is_figure = path
                        .len()
                        .checked_sub(2)
                        .is_some_and(|i| path[i].kind == NodeKind::Figure);
                    let modality = if parent_is_figure { Modality::Figure } else { Modality::Text };
                    self.emit(path, node.text.clone(), None, modality);
                }
                self.children(node, path);
            }
            _ => self.children(node, path),
        }
        path.pop();
    }

    fn children<'n>(&mut self, node: &'n DocumentNode, path: &mut Vec<&'n DocumentNode>) {
        for child in &node.children {
            self.visit(child, path);
        }
    }

    fn table<'n>(&mut self, node: &'n DocumentNode, path: &mut Vec<&'n DocumentNode>) {
        let captions = node.captions().join(" ");
        let caption = (!captions.is_empty()).then_some(captions);
        if self.policy.table_as_single_chunk {
            let grid = serialize_grid(node);
            match (grid.is_empty(), caption) {
                (false, caption) => self.emit(path, grid, caption, Modality::Table),
                (true, Some(c)) => self.emit(path, c, None, Modality::Table),
                (true, None) => {}
            }
            return;
        }
        if let Some(c) = caption {
            self.emit(path, c, None, Modality::Table);
        }
        for row in node.children.iter().filter(|c| c.kind == NodeKind::TableRow) {
            let text = serialize_row(row);
            if !text.is_empty() {
                path.push(row);
                self.emit(path, text, None, Modality::Table);
                path.pop();
            }
        }
    }
}

/// Produce structure-aware chunks in document order.
pub fn chunk_tree(tree: &DocumentTree, policy: &ChunkingPolicy) -> Result<Vec<Chunk>, DocError> {
    policy.validate()?;
    let mut emitter = Emitter {
        tree,
        policy,
        chunks: Vec::new(),
    };
    emitter.visit(&tree.root, &mut Vec::new());
    if emitter.chunks.is_empty() {
        return Err(DocError::EmptyDocument(tree.doc_id().to_string()));
    }
    Ok(emitter.chunks)
}
