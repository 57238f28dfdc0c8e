use std::collections::BTreeSet;

use proptest::prelude::*;
use serde::Deserialize;
use ten_core::checker::{compute_coverage, run_sanity_check, Rule, SanityChecker};
use ten_core::table::{flatten_table, FlattenStyle, SourceText, Table};

#[derive(Deserialize)]
struct Fixture {
    name: String,
    header: Vec<Vec<String>>,
    body: Vec<Vec<String>>,
    planted: Vec<Rule>,
}

fn corpus() -> Vec<Fixture> {
    serde_json::from_str(include_str!("fixtures/checker_corpus.json")).unwrap()
}

#[test]
fn corpus_reports_exactly_the_planted_rules() {
    let fixtures = corpus();
    assert_eq!(fixtures.len(), 30);
    let mut failures = Vec::new();
    for f in &fixtures {
        let t = Table::from_text(&f.header, &f.body);
        let src = flatten_table(&t, FlattenStyle::Ocr);
        let report = run_sanity_check(&src, &t);
        let planted: BTreeSet<Rule> = f.planted.iter().copied().collect();
        if report.rules() != planted {
            failures.push(format!("{}: planted {:?}, reported {:?}", f.name, planted, report.violations));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_covers_every_rule_and_has_controls() {
    let fixtures = corpus();
    let seen: BTreeSet<Rule> = fixtures.iter().flat_map(|f| f.planted.iter().copied()).collect();
    assert_eq!(seen, Rule::ALL.into_iter().collect());
    assert!(fixtures.iter().filter(|f| f.planted.is_empty()).count() >= 5);
}

const VOCAB: &[&str] = &[
    "", "", "alpha", "beta", "12", "345", "1,200", "3.5", "(a", "b)", "x y", "102, 205", "Revenue 750", "2024-01-03",
    "a@b.co", "-", "$7", "12,", "zeta",
];

fn cell() -> impl Strategy<Value = String> {
    prop::sample::select(VOCAB).prop_map(str::to_string)
}

fn rows(max_rows: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(cell(), 0..5), 0..max_rows)
}

fn case() -> impl Strategy<Value = (Table, SourceText)> {
    (rows(2), rows(7), prop::collection::vec(cell(), 0..20)).prop_map(|(h, b, words)| {
        (Table::from_text(&h, &b), SourceText::new(words.join(" ")))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn scores_are_bounded_and_cells_disjoint((t, src) in case()) {
        let r = run_sanity_check(&src, &t);
        for v in [r.coverage, r.hallucination_rate, r.goodness_score, r.badness_score, r.max_column_badness] {
            prop_assert!((0.0..=1.0).contains(&v), "{v} out of range");
        }
        prop_assert!(r.goodness_score + r.badness_score <= 1.0 + 1e-12);
        let c = SanityChecker::default().classify(&t);
        prop_assert!(c.consistent.is_disjoint(&c.violating));
        prop_assert_eq!(c.violating.len(), r.violating_cells);
        prop_assert!(r.consistent_cells + r.violating_cells <= r.total_cells);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn coverage_grows_when_cells_are_added((t, src) in case(), extra in cell(), at in any::<prop::sample::Index>()) {
        let before = compute_coverage(&src, &t);
        let (header, mut body) = t.clone().into_parts();
        let grid: Vec<Vec<String>> = body.iter().map(|r| r.iter().map(|c| c.text.clone()).collect()).collect();
        let mut grid = grid;
        if grid.is_empty() {
            grid.push(vec![extra]);
        } else {
            let i = at.index(grid.len());
            grid[i].push(extra);
        }
        body.clear();
        let head: Vec<Vec<String>> = header.iter().map(|r| r.iter().map(|c| c.text.clone()).collect()).collect();
        let bigger = Table::from_text(&head, &grid);
        prop_assert!(compute_coverage(&src, &bigger) >= before - 1e-12);
    }
}
