//! Cross-reference detection and resolution ("See Table 1", "as shown above").

use std::sync::OnceLock;

use regex::Regex;

use super::{CrossReference, DocumentNode, DocumentTree, NodeKind};

fn label_mention() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?:\b(?:[Ss]ee|as shown in|shown in)\s+)?\b(Table|Figure|Section)\s+(\d+(?:\.\d+)*[A-Za-z]?|[IVXLCDM]+)\b",
        )
        .expect("static regex")
    })
}

fn positional_mention() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bas shown (?:above|below)\b").expect("static regex"))
}

/// Nodes whose text may contain references. Captions and headings are
/// labels, not citing prose.
fn is_citing(kind: NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::Paragraph | NodeKind::ListItem | NodeKind::FormField | NodeKind::TableCell
    )
}

struct Label<'a> {
    kind: &'static str,
    text: String,
    target: &'a str,
}

fn collect_labels(tree: &DocumentTree) -> Vec<Label<'_>> {
    fn visit<'a>(node: &'a DocumentNode, out: &mut Vec<Label<'a>>) {
        let mut push = |kind: &'static str, text: &str| {
            let norm = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if !norm.is_empty() {
                out.push(Label {
                    kind,
                    text: norm,
                    target: &node.node_id,
                });
            }
        };
        match node.kind {
            NodeKind::Table => node.captions().into_iter().for_each(|c| push("table", c)),
            NodeKind::Figure => {
                node.captions().into_iter().for_each(|c| push("figure", c));
                push("figure", &node.text);
            }
            NodeKind::Section | NodeKind::Heading => push("section", &node.text),
            _ => {}
        }
        for child in &node.children {
            visit(child, out);
        }
    }
    let mut out = Vec::new();
    visit(&tree.root, &mut out);
    out
}

fn has_prefix(label: &str, prefix: &str) -> bool {
    label.starts_with(prefix)
        && !label[prefix.len()..]
            .chars()
            .next()
            .is_some_and(char::is_alphanumeric)
}

/// Detect reference mentions in citing nodes and resolve each against
/// table/figure captions and section headings by case-insensitive prefix
/// match. The first labelled node in document order wins. Positional
/// mentions ("as shown above") are reported unresolved.
pub fn extract_cross_references(tree: &DocumentTree) -> Vec<CrossReference> {
    let labels = collect_labels(tree);
    let mut out = Vec::new();
    for node in tree.root.walk().filter(|n| is_citing(n.kind)) {
        for caps in label_mention().captures_iter(&node.text) {
            let kind_word = caps[1].to_lowercase();
            let wanted = format!("{} {}", kind_word, caps[2].to_lowercase());
            let target = labels
                .iter()
                .find(|l| l.kind == kind_word && has_prefix(&l.text, &wanted))
                .map(|l| l.target.to_string());
            out.push(CrossReference {
                from_node: node.node_id.clone(),
                ref_text: caps[0].to_string(),
                target_node: target,
            });
        }
        for m in positional_mention().find_iter(&node.text) {
            out.push(CrossReference {
                from_node: node.node_id.clone(),
                ref_text: m.as_str().to_string(),
                target_node: None,
            });
        }
    }
    out.sort();
    out.dedup();
    out
}
