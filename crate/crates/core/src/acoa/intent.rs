use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::AcoaError;
use crate::gateway::{ChatModel, ChatRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryIntent {
    Factoid,
    TableLookup,
    MultiHop,
    Computation,
    VisualDiagram,
}

impl QueryIntent {
    pub const ALL: [QueryIntent; 5] = [
        QueryIntent::Factoid,
        QueryIntent::TableLookup,
        QueryIntent::MultiHop,
        QueryIntent::Computation,
        QueryIntent::VisualDiagram,
    ];

    /// Intents whose answer lives in a table cell or a tool result.
    pub fn needs_table(self) -> bool {
        matches!(self, QueryIntent::TableLookup | QueryIntent::Computation)
    }
}

impl fmt::Display for QueryIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

struct Rules {
    arithmetic: Regex,
    compute_words: Regex,
    visual_words: Regex,
    find_with_count: Regex,
    extremes: Regex,
    quantities: Regex,
    grid_words: Regex,
    number: Regex,
    compare_words: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static regex");
        Rules {
            arithmetic: re(r"\d\s*[-+*/×÷]\s*[\d(]|\)\s*[-+*/×÷]"),
            compute_words: re(r"(?i)\b(calculate|compute|total|sum)\b"),
            visual_words: re(
                r"(?i)\b(figures?|diagrams?|drawings?|schematics?|illustrations?|blueprints?)\b",
            ),
            find_with_count: re(
                r"(?i)\bfind\b.*\bwith\s+(\d+|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)\s+\w+",
            ),
            extremes: re(
                r"(?i)\b(highest|lowest|largest|smallest|greatest|most|least|maximum|minimum|higher|lower|larger|smaller|greater|fewer)\b",
            ),
            quantities: re(
                r"(?i)\b(percentage|percent|rate|rates|amount|number|value|ratio|share|proportion|count)\b",
            ),
            grid_words: re(r"(?i)\b(table|chart)\b"),
            number: re(r"\b\d+(?:\.\d+)?\b"),
            compare_words: re(r"(?i)\b(compare|comparison|between|versus|vs)\b"),
        }
    })
}

fn capitalized_entities(query: &str) -> BTreeSet<String> {
    query
        .split_whitespace()
        .skip(1)
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| w.chars().next().is_some_and(char::is_uppercase))
        .map(str::to_string)
        .collect()
}

/// Rule-based intent classification; the first matching rule wins.
///
/// 1. arithmetic between numbers, or calculate/compute/total/sum: Computation
/// 2. figure vocabulary, or "find ... with <count> <noun>": VisualDiagram
/// 3. an extreme plus a quantity word, table/chart vocabulary, or two or
///    more numeric qualifiers (a row and a column key): TableLookup
/// 4. compare/between/versus, or two capitalized entities joined by "and": MultiHop
/// 5. otherwise Factoid
pub fn classify_intent(query: &str) -> Result<QueryIntent, AcoaError> {
    if query.trim().is_empty() {
        return Err(AcoaError::EmptyQuery);
    }
    let r = rules();
    if r.arithmetic.is_match(query) || r.compute_words.is_match(query) {
        return Ok(QueryIntent::Computation);
    }
    if r.visual_words.is_match(query) || r.find_with_count.is_match(query) {
        return Ok(QueryIntent::VisualDiagram);
    }
    let numbers: BTreeSet<&str> = r.number.find_iter(query).map(|m| m.as_str()).collect();
    if (r.extremes.is_match(query) && r.quantities.is_match(query))
        || r.grid_words.is_match(query)
        || numbers.len() >= 2
    {
        return Ok(QueryIntent::TableLookup);
    }
    let joined = query.split_whitespace().any(|w| w.eq_ignore_ascii_case("and"));
    if r.compare_words.is_match(query) || (joined && capitalized_entities(query).len() >= 2) {
        return Ok(QueryIntent::MultiHop);
    }
    Ok(QueryIntent::Factoid)
}

const INTENT_PROMPT: &str = "Classify the user's question into exactly one label: \
Factoid, TableLookup, MultiHop, Computation, VisualDiagram. Reply with the label only.";

/// Ask `chat` for the intent; fall back to the rule table when the reply
/// names no known label.
pub fn classify_intent_with_llm(query: &str, chat: &dyn ChatModel) -> Result<QueryIntent, AcoaError> {
    let fallback = classify_intent(query)?;
    let reply = chat.chat(&ChatRequest::new(INTENT_PROMPT, query))?;
    let lowered = reply.text.to_lowercase();
    Ok(QueryIntent::ALL
        .into_iter()
        .find(|i| lowered.contains(&i.to_string().to_lowercase()))
        .unwrap_or(fallback))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockChat, MockPolicy};

    #[test]
    fn table4_questions() {
        assert_eq!(classify_intent("What is the DEF?").unwrap(), QueryIntent::Factoid);
        assert_eq!(
            classify_intent(
                "For PPL, which portfolio had the highest percentage of assets allocated to debt securities in 2015?"
            )
            .unwrap(),
            QueryIntent::TableLookup
        );
        assert_eq!(
            classify_intent("Find an enclosure with three knockouts.").unwrap(),
            QueryIntent::VisualDiagram
        );
        assert_eq!(
            classify_intent("What is the estimated BAC for a 120-pound woman in California after 2 drinks?")
                .unwrap(),
            QueryIntent::TableLookup
        );
    }

    #[test]
    fn rule_order() {
        assert_eq!(classify_intent("Calculate 2*(3+4)").unwrap(), QueryIntent::Computation);
        assert_eq!(classify_intent("what is 12 / 4").unwrap(), QueryIntent::Computation);
        // Arithmetic outranks figure vocabulary.
        assert_eq!(classify_intent("In the diagram, what is 3 + 4?").unwrap(), QueryIntent::Computation);
        assert_eq!(classify_intent("Show the wiring diagram").unwrap(), QueryIntent::VisualDiagram);
        assert_eq!(classify_intent("Which row of the chart applies?").unwrap(), QueryIntent::TableLookup);
        assert_eq!(
            classify_intent("Compare the warranty of Alpha and Beta").unwrap(),
            QueryIntent::MultiHop
        );
        assert_eq!(
            classify_intent("What do Alpha and Beta share?").unwrap(),
            QueryIntent::MultiHop
        );
        assert_eq!(classify_intent("Who wrote the manual?").unwrap(), QueryIntent::Factoid);
        assert_eq!(classify_intent("the 120-pound limit").unwrap(), QueryIntent::Factoid);
    }

    #[test]
    fn empty_query() {
        assert!(matches!(classify_intent("  "), Err(AcoaError::EmptyQuery)));
    }

    #[test]
    fn llm_override_and_fallback() {
        let chat = MockChat::new(MockPolicy::Fixed("MultiHop".into()));
        assert_eq!(
            classify_intent_with_llm("What is the DEF?", &chat).unwrap(),
            QueryIntent::MultiHop
        );
        let chat = MockChat::new(MockPolicy::Fixed("no idea".into()));
        assert_eq!(
            classify_intent_with_llm("What is the DEF?", &chat).unwrap(),
            QueryIntent::Factoid
        );
    }
}
