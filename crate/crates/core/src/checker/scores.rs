use std::collections::HashMap;

use crate::table::{alnum_projection, SourceText, Table};

/// Multiset of alphanumeric token projections, skipping tokens with none.
fn token_bag<'a>(tokens: impl Iterator<Item = &'a str>) -> HashMap<String, usize> {
    let mut bag = HashMap::new();
    for tok in tokens {
        let key = alnum_projection(tok);
        if !key.is_empty() {
            *bag.entry(key).or_insert(0) += 1;
        }
    }
    bag
}

/// Alphanumeric characters of `part` covered by `whole`, multiset semantics.
fn covered_chars(part: &HashMap<String, usize>, whole: &HashMap<String, usize>) -> usize {
    part.iter()
        .map(|(key, &n)| n.min(whole.get(key).copied().unwrap_or(0)) * key.chars().count())
        .sum()
}

/// `1 - |U|/|S|` where `S` is the source's alphanumeric characters and `U`
/// those belonging to source tokens no table cell supplies.
pub fn compute_coverage(source: &SourceText, t: &Table) -> f64 {
    let total = source.alnum_len();
    if total == 0 {
        return 1.0;
    }
    let src = token_bag(source.tokens().iter().map(String::as_str));
    let table = token_bag(t.cells().flat_map(|c| c.text.split_whitespace()));
    let uncovered = total - covered_chars(&src, &table);
    1.0 - uncovered as f64 / total as f64
}

/// How much of a cell can be traced to the source, in `[0, 1]`.
fn cell_coverage(source: &SourceText, source_bag: &HashMap<String, usize>, text: &str) -> f64 {
    let alnum = alnum_projection(text).chars().count();
    if alnum == 0 || source.raw().contains(text.trim()) {
        return 1.0;
    }
    let bag = token_bag(text.split_whitespace());
    covered_chars(&bag, source_bag) as f64 / alnum as f64
}

/// Mean over rows of the mean per-cell untraceable fraction.
pub fn compute_hallucination(source: &SourceText, t: &Table) -> f64 {
    let rows: Vec<_> = t.rows().filter(|r| !r.is_empty()).collect();
    if rows.is_empty() {
        return 0.0;
    }
    let bag = token_bag(source.tokens().iter().map(String::as_str));
    let sum: f64 = rows
        .iter()
        .map(|row| {
            let missing: f64 = row
                .iter()
                .map(|c| 1.0 - cell_coverage(source, &bag, &c.text))
                .sum();
            missing / row.len() as f64
        })
        .sum();
    (sum / rows.len() as f64).clamp(0.0, 1.0)
}
