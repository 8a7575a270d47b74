//! Tokenization and term utilities shared by every index and scorer.
//!
//! All spaces, the coverage check, the extractive mock and the lexical judge
//! go through [`tokenize`] so that a term means the same thing everywhere.

use std::collections::BTreeSet;
use std::sync::OnceLock;

const STOPWORDS_V1: &str = include_str!("../resources/stopwords_v1.txt");

/// Version tag of the bundled stopword list.
pub const STOPWORDS_VERSION: u32 = 1;

fn stopword_set() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// The bundled stopword list, sorted.
pub fn stopwords() -> impl Iterator<Item = &'static str> {
    stopword_set().iter().copied()
}

pub fn is_stopword(term: &str) -> bool {
    stopword_set().contains(term)
}

/// Lowercase, strip punctuation and split on whitespace.
///
/// Hyphens survive between two alphanumerics (`120-pound`) and so do
/// decimal points between two digits (`0.11`); every other non-alphanumeric
/// character is dropped without splitting the word.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for word in lower.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut token = String::with_capacity(word.len());
        for (i, &c) in chars.iter().enumerate() {
            if c.is_alphanumeric() {
                token.push(c);
                continue;
            }
            let prev = if i > 0 { chars.get(i - 1) } else { None };
            let next = chars.get(i + 1);
            let keep = match c {
                '-' => matches!((prev, next), (Some(p), Some(n)) if p.is_alphanumeric() && n.is_alphanumeric()),
                '.' => matches!((prev, next), (Some(p), Some(n)) if p.is_ascii_digit() && n.is_ascii_digit()),
                _ => false,
            };
            if keep {
                token.push(c);
            }
        }
        if !token.is_empty() {
            out.push(token);
        }
    }
    out
}

/// Tokens minus stopwords, in order of first appearance, deduplicated.
pub fn content_terms(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Content terms plus the parts of hyphenated terms (`120-pound` also
/// yields `120` and `pound`). Used for header matching in tables.
pub fn loose_terms(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in content_terms(text) {
        if t.contains('-') {
            out.extend(
                t.split('-')
                    .filter(|p| !p.is_empty() && !is_stopword(p))
                    .map(str::to_string),
            );
        }
        out.insert(t);
    }
    out
}

/// Tokens joined by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Split at sentence boundaries: `.`, `?` or `!` followed by whitespace.
///
/// The trailing whitespace stays with the sentence it follows, so the
/// pieces concatenate back to the input exactly.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let Some(&(_, next)) = iter.peek() else { break };
        if !next.is_whitespace() {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, w)) = iter.peek() {
            if !w.is_whitespace() {
                break;
            }
            end = j + w.len_utf8();
            iter.next();
        }
        out.push(&text[start..end]);
        start = end;
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// `ceil(chars / 4)`, at least 1.
pub fn token_estimate(text: &str) -> usize {
    text.chars().count().div_ceil(4).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_has_fifty_entries() {
        assert_eq!(stopwords().count(), 50);
        assert!(!is_stopword("estimated"));
        assert!(is_stopword("the"));
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(tokenize("Hello, World!"), vec!["hello", "world"]);
        assert_eq!(tokenize("120-pound woman"), vec!["120-pound", "woman"]);
        assert_eq!(tokenize("≈0.11% end."), vec!["0.11", "end"]);
        assert_eq!(tokenize("7,650 lb -- (see)"), vec!["7650", "lb", "see"]);
        assert_eq!(tokenize("a-"), vec!["a"]);
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn content_terms_drop_stopwords_and_dupes() {
        assert_eq!(content_terms("What is the DEF? the DEF"), vec!["def"]);
    }

    #[test]
    fn loose_terms_split_hyphens() {
        let t = loose_terms("a 120-pound woman");
        assert!(t.contains("120") && t.contains("pound") && t.contains("120-pound"));
    }

    #[test]
    fn sentences_concatenate_to_input() {
        let text = "One. Two?  Three! four.five end";
        let parts = split_sentences(text);
        assert_eq!(parts, vec!["One. ", "Two?  ", "Three! ", "four.five end"]);
        assert_eq!(parts.concat(), text);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("Ends."), vec!["Ends."]);
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(token_estimate(""), 1);
        assert_eq!(token_estimate("abcd"), 1);
        assert_eq!(token_estimate("abcde"), 2);
    }
}
