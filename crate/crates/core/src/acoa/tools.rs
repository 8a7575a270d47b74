use std::collections::BTreeSet;
use std::sync::OnceLock;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use regex::Regex;

use super::AcoaError;
use crate::doc::{Chunk, Modality};
use crate::text::loose_terms;

/// Split a serialized grid back into rows of cells.
pub fn parse_grid(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(" | ").map(|c| c.trim().to_string()).collect())
        .collect()
}

fn overlap(cell: &str, terms: &BTreeSet<String>) -> usize {
    loose_terms(cell).intersection(terms).count()
}

fn term_set(terms: &[String]) -> BTreeSet<String> {
    terms.iter().flat_map(|t| loose_terms(t)).collect()
}

/// Index and overlap of the candidate with the largest overlap; the first
/// wins ties and zero overlap selects nothing.
fn best<'a>(candidates: impl Iterator<Item = (usize, &'a str)>, terms: &BTreeSet<String>) -> Option<(usize, usize)> {
    let mut pick: Option<(usize, usize)> = None;
    for (i, cell) in candidates {
        let n = overlap(cell, terms);
        if n > 0 && pick.is_none_or(|(_, b)| n > b) {
            pick = Some((i, n));
        }
    }
    pick
}

fn ensure_table(chunk: &Chunk) -> Result<Vec<Vec<String>>, AcoaError> {
    if chunk.modality != Modality::Table {
        return Err(AcoaError::NotATable(chunk.chunk_id.clone()));
    }
    Ok(parse_grid(&chunk.text))
}

/// Cell at the row whose header (first cell) best matches `row_terms` and
/// the column whose header (first row) best matches `col_terms`.
pub fn table_lookup(chunk: &Chunk, row_terms: &[String], col_terms: &[String]) -> Result<Option<String>, AcoaError> {
    Ok(table_match(chunk, row_terms, col_terms)?.map(|(v, _)| v))
}

/// Like [`table_lookup`], also returning the summed row and column header
/// overlap so callers can rank several tables.
pub fn table_match(
    chunk: &Chunk,
    row_terms: &[String],
    col_terms: &[String],
) -> Result<Option<(String, usize)>, AcoaError> {
    let grid = ensure_table(chunk)?;
    let Some(header) = grid.first() else { return Ok(None) };
    let rows = term_set(row_terms);
    let cols = term_set(col_terms);
    let row = best(
        grid.iter().enumerate().skip(1).filter_map(|(i, r)| r.first().map(|c| (i, c.as_str()))),
        &rows,
    );
    let col = best(header.iter().enumerate().skip(1).map(|(j, c)| (j, c.as_str())), &cols);
    Ok(match (row, col) {
        (Some((r, a)), Some((c, b))) => grid[r].get(c).filter(|v| !v.is_empty()).map(|v| (v.clone(), a + b)),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

fn extreme_words() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(highest|largest|greatest|most|maximum|biggest|lowest|smallest|least|minimum|fewest)\b")
            .expect("static regex")
    })
}

/// Superlative direction asked for by `query`, if any.
pub fn superlative(query: &str) -> Option<Extreme> {
    let word = extreme_words().find(query)?.as_str().to_ascii_lowercase();
    Some(match word.as_str() {
        "lowest" | "smallest" | "least" | "minimum" | "fewest" => Extreme::Min,
        _ => Extreme::Max,
    })
}

fn numeric(cell: &str) -> Option<f64> {
    let cleaned: String = cell
        .chars()
        .filter(|c| !matches!(c, '%' | '$' | ',' | '€' | '£') && !c.is_whitespace())
        .collect();
    cleaned.parse().ok()
}

/// Row whose value in the best-matching column is the extreme one.
/// Returns `(row header, column header, value)`.
pub fn table_extreme(
    chunk: &Chunk,
    col_terms: &[String],
    extreme: Extreme,
) -> Result<Option<(String, String, String)>, AcoaError> {
    let grid = ensure_table(chunk)?;
    let Some(header) = grid.first() else { return Ok(None) };
    let Some((col, _)) = best(
        header.iter().enumerate().skip(1).map(|(j, c)| (j, c.as_str())),
        &term_set(col_terms),
    ) else {
        return Ok(None);
    };
    let mut pick: Option<(usize, f64)> = None;
    for (i, row) in grid.iter().enumerate().skip(1) {
        let Some(v) = row.get(col).and_then(|c| numeric(c)) else { continue };
        let better = match (pick, extreme) {
            (None, _) => true,
            (Some((_, b)), Extreme::Max) => v > b,
            (Some((_, b)), Extreme::Min) => v < b,
        };
        if better {
            pick = Some((i, v));
        }
    }
    Ok(pick.map(|(i, _)| (grid[i][0].clone(), header[col].clone(), grid[i][col].clone())))
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn fail(&self, msg: &str) -> AcoaError {
        AcoaError::ToolFailure(format!("calculate `{}`: {msg} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<BigRational, AcoaError> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-' | '−')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<BigRational, AcoaError> {
        let mut acc = self.factor()?;
        while let Some(op @ ('*' | '/' | '×' | '÷')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            if matches!(op, '*' | '×') {
                acc *= rhs;
            } else {
                if rhs.is_zero() {
                    return Err(self.fail("division by zero"));
                }
                acc /= rhs;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<BigRational, AcoaError> {
        match self.peek() {
            Some('-' | '−') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.fail("expected `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => Err(self.fail(&format!("unexpected `{c}`"))),
            None => Err(self.fail("unexpected end")),
        }
    }

    fn number(&mut self) -> Result<BigRational, AcoaError> {
        let start = self.pos;
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == '.')
        {
            self.pos += 1;
        }
        let lit: String = self.chars[start..self.pos].iter().collect();
        let (int, frac) = lit.split_once('.').unwrap_or((&lit, ""));
        if (int.is_empty() && frac.is_empty()) || frac.contains('.') {
            return Err(self.fail("bad number"));
        }
        let digits = format!("{int}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| self.fail("bad number"))?;
        let denom = num::pow(BigInt::from(10), frac.len());
        Ok(BigRational::new(numer, denom))
    }
}

/// Exact evaluation of `+ - * / × ÷`, parentheses and unary minus.
pub fn evaluate(expression: &str) -> Result<BigRational, AcoaError> {
    let mut p = Parser {
        chars: expression.chars().filter(|c| *c != ',').collect(),
        pos: 0,
        src: expression,
    };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(p.fail("trailing input"));
    }
    Ok(v)
}

/// Integers print as integers; other values as decimals rounded to six
/// places with trailing zeros removed.
pub fn format_number(v: &BigRational) -> String {
    if v.is_integer() {
        return v.to_integer().to_string();
    }
    let scale = BigInt::from(1_000_000);
    let scaled = (v * BigRational::from_integer(scale.clone())).round().to_integer();
    let neg = scaled.is_negative();
    let abs = scaled.abs();
    let int = &abs / &scale;
    let frac = (&abs % &scale).to_u64().unwrap_or(0);
    let mut s = format!("{int}.{frac:06}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if neg && (abs > BigInt::zero()) {
        s.insert(0, '-');
    }
    s
}

pub fn calculate(expression: &str) -> Result<String, AcoaError> {
    evaluate(expression).map(|v| format_number(&v))
}

fn arithmetic_span() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[-−(]*\s*\d[\d.,]*(?:\s*[)]*\s*[-−+*/×÷]\s*[-−(]*\s*\d[\d.,]*)+\s*[)]*").expect("static regex")
    })
}

/// First arithmetic expression embedded in `query`.
pub fn extract_expression(query: &str) -> Option<String> {
    arithmetic_span().find(query).map(|m| {
        m.as_str()
            .trim()
            .trim_end_matches(['.', ','])
            .to_string()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::Modality;

    fn table(text: &str) -> Chunk {
        Chunk {
            chunk_id: "d#0".into(),
            doc_id: "d".into(),
            node_path: vec!["r".into(), "t".into()],
            text: text.into(),
            caption: None,
            breadcrumb: vec![],
            modality: Modality::Table,
            token_estimate: 1,
            node_kinds: vec![],
        }
    }

    const BAC: &str = "Weight | 1 drink | 2 drinks | 3 drinks\n100 lb | 0.05 | 0.09 | 0.14\n120 lb | 0.04 | 0.11 | 0.15\n140 lb | 0.03 | 0.08 | 0.11";

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bac_lookup() {
        let t = table(BAC);
        assert_eq!(table_lookup(&t, &v(&["120"]), &v(&["2", "drinks"])).unwrap().as_deref(), Some("0.11"));
        assert_eq!(table_lookup(&t, &v(&["200"]), &v(&["2", "drinks"])).unwrap(), None);
        let mut p = table("text");
        p.modality = Modality::Text;
        assert!(matches!(table_lookup(&p, &v(&["a"]), &v(&["b"])), Err(AcoaError::NotATable(_))));
    }

    #[test]
    fn hyphenated_query_terms_match_headers() {
        let t = table(BAC);
        let q = v(&["120-pound", "woman", "2", "drinks"]);
        assert_eq!(table_lookup(&t, &q, &q).unwrap().as_deref(), Some("0.11"));
    }

    #[test]
    fn extremes() {
        let t = table("Portfolio | Equity Securities | Debt Securities\nGrowth Portfolio | 80% | 13%\nBalanced Portfolio | 85% | 9%\nIncome Portfolio | 90% | 7%");
        assert_eq!(superlative("which had the highest share"), Some(Extreme::Max));
        assert_eq!(superlative("the lowest rate"), Some(Extreme::Min));
        assert_eq!(superlative("what is the rate"), None);
        let got = table_extreme(&t, &v(&["debt", "securities"]), Extreme::Max).unwrap().unwrap();
        assert_eq!(got, ("Growth Portfolio".into(), "Debt Securities".into(), "13%".into()));
        let got = table_extreme(&t, &v(&["debt"]), Extreme::Min).unwrap().unwrap();
        assert_eq!(got.0, "Income Portfolio");
    }

    #[test]
    fn calculator() {
        assert_eq!(calculate("2*(3+4)").unwrap(), "14");
        assert_eq!(calculate("10 / 4").unwrap(), "2.5");
        assert_eq!(calculate("1/3").unwrap(), "0.333333");
        assert_eq!(calculate("-2 × 3 ÷ 4").unwrap(), "-1.5");
        assert_eq!(calculate("0.1 + 0.2").unwrap(), "0.3");
        assert_eq!(calculate("7,650 - 650").unwrap(), "7000");
        assert_eq!(calculate("2 - 3 - 4").unwrap(), "-5");
        assert!(matches!(calculate("1/0"), Err(AcoaError::ToolFailure(_))));
        assert!(calculate("2 +").is_err());
        assert!(calculate("(2").is_err());
        assert!(calculate("2 ) 3").is_err());
        assert!(calculate("1.2.3").is_err());
    }

    #[test]
    fn expression_extraction() {
        assert_eq!(extract_expression("What is 2*(3+4)?").as_deref(), Some("2*(3+4)"));
        assert_eq!(extract_expression("Calculate 12 / 4.").as_deref(), Some("12 / 4"));
        assert_eq!(extract_expression("what is the total"), None);
        assert_eq!(extract_expression("a 120-pound woman"), None);
    }
}
