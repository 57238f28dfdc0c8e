//! Gold-referenced table similarity metrics.

mod ted;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use ted::{tree_distance, tree_edit_distance, NodeLabel, TableTree};

use crate::checker::{compute_coverage, compute_hallucination};
use crate::table::{normalize_text, SourceText, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub em: u8,
    pub ted: f64,
    pub cvm: f64,
    pub colvm: f64,
    pub coverage: f64,
    pub hallucination: f64,
}

impl MetricReport {
    /// Scores recorded for a task that produced no table.
    pub fn worst() -> Self {
        MetricReport { em: 0, ted: 1.0, cvm: 0.0, colvm: 0.0, coverage: 0.0, hallucination: 1.0 }
    }

    pub const TSV_HEADER: &'static str = "task_id\tem\tted\tcvm\tcolvm\tcoverage\thallucination";

    pub fn tsv_row(&self, task_id: &str) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{}\t{}\t{:.6}\t{:.4}\t{:.4}\t{:.6}\t{:.6}",
            task_id.replace(['\t', '\n', '\r'], " "),
            self.em,
            self.ted,
            self.cvm,
            self.colvm,
            self.coverage,
            self.hallucination
        );
        s
    }
}

fn normalized_grid(t: &Table) -> Vec<Vec<String>> {
    t.grid()
        .into_iter()
        .map(|row| row.into_iter().map(normalize_text).collect())
        .collect()
}

/// 1 when both tables have the same grid and header split and every cell
/// agrees after whitespace normalization.
pub fn exact_match(pred: &Table, gold: &Table) -> u8 {
    u8::from(
        pred.header_rows().len() == gold.header_rows().len()
            && normalized_grid(pred) == normalized_grid(gold),
    )
}

/// Share of gold cells (grid positions) whose normalized text the prediction
/// also contains, as a multiset, in percent.
pub fn cell_value_match(pred: &Table, gold: &Table) -> f64 {
    let gold_cells: Vec<String> = normalized_grid(gold).into_iter().flatten().collect();
    let mut available: HashMap<String, usize> = HashMap::new();
    let mut pred_len = 0;
    for cell in normalized_grid(pred).into_iter().flatten() {
        *available.entry(cell).or_default() += 1;
        pred_len += 1;
    }
    if gold_cells.is_empty() {
        return if pred_len == 0 { 100.0 } else { 0.0 };
    }
    let mut hits = 0;
    for cell in &gold_cells {
        if let Some(n) = available.get_mut(cell).filter(|n| **n > 0) {
            *n -= 1;
            hits += 1;
        }
    }
    hits as f64 / gold_cells.len() as f64 * 100.0
}

fn body_columns(t: &Table) -> Vec<Vec<String>> {
    let grid = normalized_grid(t);
    let body = &grid[t.body_offset().min(grid.len())..];
    (0..t.width())
        .map(|c| body.iter().map(|row| row[c].clone()).collect())
        .collect()
}

/// Percent of gold body columns reproduced exactly by some prediction
/// column. Each prediction column is used once, first fit, left to right.
pub fn column_value_match(pred: &Table, gold: &Table) -> f64 {
    let gold_cols = body_columns(gold);
    let pred_cols = body_columns(pred);
    if gold_cols.is_empty() {
        return if pred_cols.is_empty() { 100.0 } else { 0.0 };
    }
    let mut used = vec![false; pred_cols.len()];
    let mut matched = 0;
    for g in &gold_cols {
        if let Some(i) = (0..pred_cols.len()).find(|&i| !used[i] && pred_cols[i] == *g) {
            used[i] = true;
            matched += 1;
        }
    }
    matched as f64 / gold_cols.len() as f64 * 100.0
}

pub fn evaluate(pred: &Table, gold: &Table, source: &SourceText) -> MetricReport {
    MetricReport {
        em: exact_match(pred, gold),
        ted: tree_edit_distance(pred, gold),
        cvm: cell_value_match(pred, gold),
        colvm: column_value_match(pred, gold),
        coverage: compute_coverage(source, pred),
        hallucination: compute_hallucination(source, pred),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{flatten_table, FlattenStyle};

    fn t(header: &[&str], body: &[&[&str]]) -> Table {
        let body: Vec<Vec<&str>> = body.iter().map(|r| r.to_vec()).collect();
        if header.is_empty() {
            Table::from_text::<&str>(&[], &body)
        } else {
            Table::from_text(&[header.to_vec()], &body)
        }
    }

    #[test]
    fn exact_match_examples() {
        let a = t(&["x", "y"], &[&["1", "2"]]);
        assert_eq!(exact_match(&a, &a), 1);
        assert_eq!(exact_match(&a, &t(&["x", "y"], &[&["1", "3"]])), 0);
        assert_eq!(exact_match(&t(&["x  y"], &[]), &t(&["x y"], &[])), 1);
        assert_eq!(exact_match(&t(&[], &[&["a"]]), &t(&[], &[&["a", ""]])), 0);
        assert_eq!(exact_match(&t(&["a"], &[]), &t(&[], &[&["a"]])), 0);
    }

    #[test]
    fn cvm_examples() {
        let gold = t(&[], &[&["a", "b"], &["c", "d"]]);
        assert_eq!(cell_value_match(&gold, &gold), 100.0);
        assert_eq!(cell_value_match(&t(&[], &[&["w", "x"], &["y", "z"]]), &gold), 0.0);
        assert_eq!(cell_value_match(&t(&[], &[&["d", "q"], &["b", "a"]]), &gold), 75.0);
        assert_eq!(cell_value_match(&Table::default(), &Table::default()), 100.0);
        // Duplicates are consumed once each.
        assert_eq!(cell_value_match(&t(&[], &[&["a", "a"]]), &t(&[], &[&["a", "b"]])), 50.0);
    }

    #[test]
    fn colvm_examples() {
        let gold = t(&["h1", "h2", "h3"], &[&["1", "2", "3"], &["4", "5", "6"]]);
        assert_eq!(column_value_match(&gold, &gold), 100.0);
        let permuted = t(&["h3", "h1", "h2"], &[&["3", "1", "2"], &["6", "4", "5"]]);
        assert_eq!(column_value_match(&permuted, &gold), 100.0);
        let one = t(&["h1", "h2", "h3"], &[&["1", "x", "y"], &["4", "z", "w"]]);
        assert!((column_value_match(&one, &gold) - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_examples() {
        let gold = t(&["a", "b", "c"], &[&["1", "2", "3"], &["4", "5", "6"]]);
        let src = flatten_table(&gold, FlattenStyle::Ocr);
        let r = evaluate(&gold, &gold, &src);
        assert_eq!((r.em, r.ted, r.cvm, r.colvm), (1, 0.0, 100.0, 100.0));
        assert_eq!((r.coverage, r.hallucination), (1.0, 0.0));

        let empty = evaluate(&Table::default(), &gold, &src);
        assert_eq!((empty.em, empty.cvm, empty.colvm), (0, 0.0, 0.0));

        let pred = t(&["a", "b", "c"], &[&["1", "2", "3"], &["4", "5", "X"]]);
        let r = evaluate(&pred, &gold, &src);
        assert_eq!(r.em, 0);
        assert!((r.ted - 1.0 / 13.0).abs() < 1e-12);
        assert!((r.cvm - 800.0 / 9.0).abs() < 1e-9);
        assert!((r.colvm - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn tsv_row_format() {
        let r = MetricReport { em: 1, ted: 0.0, cvm: 100.0, colvm: 100.0, coverage: 1.0, hallucination: 0.0 };
        let row = r.tsv_row("task\t1");
        assert_eq!(row.split('\t').count(), 7);
        assert!(row.starts_with("task 1\t1\t0.000000\t100.0000"));
        assert_eq!(MetricReport::TSV_HEADER.split('\t').count(), 7);
    }
}
