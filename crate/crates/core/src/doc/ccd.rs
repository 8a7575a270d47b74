//! Canonical Corpus Document (`.ccd.json`) reader and writer.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{extract_cross_references, DocError, DocumentMetadata, DocumentNode, DocumentTree, NodeKind};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CcdFile {
    metadata: DocumentMetadata,
    root: CcdNode,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CcdNode {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<CcdNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    page_span: Option<[u32; 2]>,
}

/// Parse a CCD byte buffer into a validated tree with resolved
/// cross-references.
pub fn parse_ccd(raw: &[u8]) -> Result<DocumentTree, DocError> {
    let file: CcdFile = serde_json::from_slice(raw).map_err(|e| DocError::MalformedDocument {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate_metadata(&file.metadata)?;
    if file.root.kind != NodeKind::Section {
        return Err(DocError::InvariantViolation(format!(
            "root `{}` must be a section, found {:?}",
            file.root.id, file.root.kind
        )));
    }
    let mut seen = BTreeSet::new();
    let root = convert(file.root, 0, None, &mut seen)?;
    let mut tree = DocumentTree {
        metadata: file.metadata,
        root,
        cross_refs: Vec::new(),
    };
    tree.cross_refs = extract_cross_references(&tree);
    Ok(tree)
}

/// Serialize a tree back to CCD JSON. Cross-references are derived data
/// and are not written.
pub fn to_ccd_json(tree: &DocumentTree) -> String {
    fn back(node: &DocumentNode) -> CcdNode {
        CcdNode {
            id: node.node_id.clone(),
            kind: node.kind,
            text: node.text.clone(),
            children: node.children.iter().map(back).collect(),
            page_span: node.page_span.map(|(a, b)| [a, b]),
        }
    }
    let file = CcdFile {
        metadata: tree.metadata.clone(),
        root: back(&tree.root),
    };
    serde_json::to_string_pretty(&file).expect("CCD serialization is infallible")
}

fn validate_metadata(meta: &DocumentMetadata) -> Result<(), DocError> {
    if meta.doc_id.trim().is_empty() {
        return Err(DocError::InvariantViolation("metadata.doc_id is empty".into()));
    }
    if meta.doc_id.contains('#') {
        return Err(DocError::InvariantViolation(format!(
            "doc_id `{}` must not contain `#`",
            meta.doc_id
        )));
    }
    if meta.tags.keys().any(|k| k.trim().is_empty()) {
        return Err(DocError::InvariantViolation("empty tag key".into()));
    }
    Ok(())
}

fn convert(
    node: CcdNode,
    ordinal: usize,
    parent: Option<NodeKind>,
    seen: &mut BTreeSet<String>,
) -> Result<DocumentNode, DocError> {
    if node.id.is_empty() {
        return Err(DocError::InvariantViolation("node with empty id".into()));
    }
    if !seen.insert(node.id.clone()) {
        return Err(DocError::DuplicateNodeId(node.id));
    }
    let nesting_ok = match node.kind {
        NodeKind::TableRow => parent == Some(NodeKind::Table),
        NodeKind::TableCell => parent == Some(NodeKind::TableRow),
        _ => true,
    };
    if !nesting_ok {
        return Err(DocError::InvariantViolation(format!(
            "{:?} `{}` cannot appear under {:?}",
            node.kind, node.id, parent
        )));
    }
    let child_ok = |k: NodeKind| match node.kind {
        NodeKind::TableRow => k == NodeKind::TableCell,
        NodeKind::Table => matches!(k, NodeKind::TableRow | NodeKind::Caption),
        NodeKind::TableCell => false,
        _ => true,
    };
    if let Some(bad) = node.children.iter().find(|c| !child_ok(c.kind)) {
        return Err(DocError::InvariantViolation(format!(
            "{:?} `{}` has a {:?} child `{}`",
            node.kind, node.id, bad.kind, bad.id
        )));
    }
    if let Some([a, b]) = node.page_span {
        if a > b {
            return Err(DocError::InvariantViolation(format!(
                "node `{}` has inverted page span {a}..{b}",
                node.id
            )));
        }
    }
    let kind = node.kind;
    let children = node
        .children
        .into_iter()
        .enumerate()
        .map(|(i, c)| convert(c, i, Some(kind), seen))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DocumentNode {
        node_id: node.id,
        kind,
        text: node.text,
        children,
        ordinal,
        page_span: node.page_span.map(|[a, b]| (a, b)),
    })
}
