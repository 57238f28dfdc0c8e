use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::entity::{EntityKind, EntityPatterns};
use super::{Location, Rule, Violation};
use crate::table::{Cell, Table};

/// Character classes present in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Signature {
    pub has_digits: bool,
    pub has_letters: bool,
    pub has_punct: bool,
    pub has_whitespace: bool,
}

impl Signature {
    pub fn of(text: &str) -> Self {
        let mut s = Signature::default();
        for c in text.chars() {
            if c.is_numeric() {
                s.has_digits = true;
            } else if c.is_alphabetic() {
                s.has_letters = true;
            } else if c.is_whitespace() {
                s.has_whitespace = true;
            } else {
                s.has_punct = true;
            }
        }
        s
    }

    fn describe(self) -> String {
        let parts: Vec<&str> = [
            (self.has_digits, "digits"),
            (self.has_letters, "letters"),
            (self.has_punct, "punctuation"),
            (self.has_whitespace, "whitespace"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        if parts.is_empty() {
            "empty".into()
        } else {
            parts.join("+")
        }
    }
}

/// One column's body cells as `(global row, text)`, in row order. Cells are
/// those anchored at the column; positions covered by spans are absent.
pub type Column<'a> = Vec<(usize, &'a str)>;

pub(crate) fn body_columns(t: &Table) -> Vec<Column<'_>> {
    let mut cols: Vec<Column<'_>> = vec![Vec::new(); t.width()];
    for cell in t.body_cells() {
        if let Some(col) = cols.get_mut(cell.col) {
            col.push((cell.row, cell.text.as_str()));
        }
    }
    cols
}

pub(crate) fn detect_empty_rows(t: &Table) -> Vec<Violation> {
    let offset = t.body_offset();
    t.body_rows()
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().all(Cell::is_blank))
        .map(|(i, _)| Violation {
            rule: Rule::EmptyRow,
            location: Location::Row(offset + i),
            detail: "row holds only empty or whitespace cells".into(),
        })
        .collect()
}

/// Outcome of the column consistency pass for one column.
#[derive(Debug, Default)]
pub(crate) struct ColumnVerdict {
    pub kind: Option<EntityKind>,
    pub consistent_rows: Vec<usize>,
    pub violation: Option<Violation>,
}

pub(crate) fn analyze_column(
    patterns: &EntityPatterns,
    entity_threshold: f64,
    signature_threshold: f64,
    col: usize,
    column: &[(usize, &str)],
) -> ColumnVerdict {
    let kind = patterns.detect(column.iter().map(|&(_, t)| t), entity_threshold);
    let Some(kind) = kind else {
        let (consistent_rows, violation) = signature_majority(signature_threshold, col, column);
        return ColumnVerdict { kind: None, consistent_rows, violation };
    };
    let mut verdict = ColumnVerdict { kind: Some(kind), ..Default::default() };
    let mut odd = Vec::new();
    for &(row, text) in column.iter().filter(|(_, t)| !t.trim().is_empty()) {
        if patterns.matches(kind, text) {
            verdict.consistent_rows.push(row);
        } else {
            odd.push((row, text));
        }
    }
    if !odd.is_empty() {
        verdict.violation = Some(Violation {
            rule: Rule::InconsistentColumn,
            detail: format!(
                "column {col} holds {kind} values but {} do not match",
                quote_list(odd.iter().map(|&(_, t)| t))
            ),
            location: Location::Column { col, rows: odd.iter().map(|&(r, _)| r).collect() },
        });
    }
    verdict
}

fn signature_majority(
    threshold: f64,
    col: usize,
    column: &[(usize, &str)],
) -> (Vec<usize>, Option<Violation>) {
    let cells: Vec<(usize, &str, Signature)> = column
        .iter()
        .filter(|(_, t)| !t.trim().is_empty())
        .map(|&(r, t)| (r, t, Signature::of(t.trim())))
        .collect();
    let mut counts: BTreeMap<Signature, usize> = BTreeMap::new();
    for &(_, _, sig) in &cells {
        *counts.entry(sig).or_default() += 1;
    }
    // Highest count wins; among equals the smallest signature, for determinism.
    let Some((&major, &n)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
        return (Vec::new(), None);
    };
    if (n as f64) < threshold * cells.len() as f64 {
        return (Vec::new(), None);
    }
    let consistent = cells.iter().filter(|c| c.2 == major).map(|c| c.0).collect();
    let odd: Vec<_> = cells.iter().filter(|c| c.2 != major).collect();
    if odd.is_empty() {
        return (consistent, None);
    }
    let violation = Violation {
        rule: Rule::InconsistentColumn,
        detail: format!(
            "column {col} is mostly {} but {} differ",
            major.describe(),
            quote_list(odd.iter().map(|c| c.1))
        ),
        location: Location::Column { col, rows: odd.iter().map(|c| c.0).collect() },
    };
    (consistent, Some(violation))
}

fn quote_list<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    texts.map(|t| format!("{:?}", t.trim())).collect::<Vec<_>>().join(", ")
}

/// Signature analysis for a column with no detected entity type.
pub(crate) fn signature_analysis(threshold: f64, col: usize, column: &[(usize, &str)]) -> Vec<Violation> {
    signature_majority(threshold, col, column).1.into_iter().collect()
}

fn trim_token(tok: &str) -> &str {
    tok.trim_matches(|c| matches!(c, ',' | ';' | ':'))
}

static PLUS_MINUS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s*±\s*").unwrap());

/// Counts numeric and alphabetic whitespace-separated tokens.
fn token_profile(patterns: &EntityPatterns, text: &str) -> (usize, usize) {
    let joined = PLUS_MINUS.replace_all(text, "±");
    let mut numeric = 0;
    let mut alpha = 0;
    for tok in joined.split_whitespace() {
        let tok = trim_token(tok);
        if tok.is_empty() {
            continue;
        }
        if patterns.matches(EntityKind::Number, tok) {
            numeric += 1;
        } else {
            let letters = tok.trim_matches(|c: char| !c.is_alphanumeric());
            if !letters.is_empty() && letters.chars().all(char::is_alphabetic) {
                alpha += 1;
            }
        }
    }
    (numeric, alpha)
}

pub(crate) fn is_merged_cell(patterns: &EntityPatterns, text: &str, numeric_column: bool) -> bool {
    let text = text.trim();
    if text.is_empty() {
        return false;
    }
    let whole = patterns.classify(text);
    if whole.is_some_and(|k| k != EntityKind::Word) {
        return false;
    }
    let (numeric, alpha) = token_profile(patterns, text);
    numeric >= 2 || (numeric == 1 && alpha >= 1 && numeric_column)
}

pub(crate) fn detect_merged_cells(
    patterns: &EntityPatterns,
    t: &Table,
    column_kinds: &[Option<EntityKind>],
) -> Vec<Violation> {
    t.body_cells()
        .filter(|cell| {
            let numeric = column_kinds.get(cell.col).copied().flatten() == Some(EntityKind::Number);
            is_merged_cell(patterns, &cell.text, numeric)
        })
        .map(|cell| Violation {
            rule: Rule::MergedCell,
            location: Location::Cell { row: cell.row, col: cell.col },
            detail: format!("{:?} holds several values", cell.text.trim()),
        })
        .collect()
}

static DANGLING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+\-−(]?[$€£¥]?[\d.,]*\d[,.]$").unwrap());
static SHORT_GROUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{1,3}$").unwrap());
static THOUSANDS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{3}$").unwrap());

pub(crate) fn is_delimiter_split(left: &str, right: &str) -> bool {
    let (left, right) = (left.trim(), right.trim());
    if right.is_empty() {
        return false;
    }
    DANGLING.is_match(left) || (SHORT_GROUP.is_match(left) && THOUSANDS.is_match(right))
}

pub(crate) fn detect_delimiter_errors(t: &Table) -> Vec<Violation> {
    let mut out = Vec::new();
    for row in t.body_rows() {
        for left in row {
            let next = left.col + left.colspan;
            let Some(right) = row.iter().find(|c| c.col == next) else {
                continue;
            };
            if is_delimiter_split(&left.text, &right.text) {
                out.push(Violation {
                    rule: Rule::DelimiterError,
                    location: Location::Cell { row: left.row, col: left.col },
                    detail: format!(
                        "{:?} and {:?} look like one value split at a separator",
                        left.text.trim(),
                        right.text.trim()
                    ),
                });
            }
        }
    }
    out
}

pub(crate) fn has_unbalanced_brackets(text: &str) -> bool {
    let mut stack = Vec::new();
    for c in text.chars() {
        match c {
            '(' | '[' | '{' => stack.push(c),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                if stack.pop() != Some(want) {
                    return true;
                }
            }
            _ => {}
        }
    }
    !stack.is_empty()
}

pub(crate) fn detect_unbalanced_brackets(t: &Table) -> Vec<Violation> {
    t.body_cells()
        .filter(|cell| has_unbalanced_brackets(&cell.text))
        .map(|cell| Violation {
            rule: Rule::UnbalancedBrackets,
            location: Location::Cell { row: cell.row, col: cell.col },
            detail: format!("{:?} has unmatched brackets", cell.text.trim()),
        })
        .collect()
}
