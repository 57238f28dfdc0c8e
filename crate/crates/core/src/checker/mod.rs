//! Symbolic validation of a candidate table against its source text.

mod entity;
mod rules;
mod scores;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

pub use entity::{EntityKind, EntityPatterns, EntityType, PatternError};
pub use rules::{Column, Signature};
pub use scores::{compute_coverage, compute_hallucination};

use crate::table::{Cell, SourceText, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "Empty Row")]
    EmptyRow,
    #[serde(rename = "Inconsistent Column")]
    InconsistentColumn,
    #[serde(rename = "Merged Cell")]
    MergedCell,
    #[serde(rename = "Unbalanced Brackets")]
    UnbalancedBrackets,
    #[serde(rename = "Delimiter Error")]
    DelimiterError,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::EmptyRow,
        Rule::InconsistentColumn,
        Rule::MergedCell,
        Rule::UnbalancedBrackets,
        Rule::DelimiterError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Rule::EmptyRow => "Empty Row",
            Rule::InconsistentColumn => "Inconsistent Column",
            Rule::MergedCell => "Merged Cell",
            Rule::UnbalancedBrackets => "Unbalanced Brackets",
            Rule::DelimiterError => "Delimiter Error",
        }
    }

    pub fn from_label(label: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.label() == label)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a violation applies. Row indices count header rows first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Row(usize),
    Column { col: usize, rows: Vec<usize> },
    Cell { row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "ViolationRecord", try_from = "ViolationRecord")]
pub struct Violation {
    pub rule: Rule,
    pub location: Location,
    pub detail: String,
}

#[derive(Serialize, Deserialize)]
struct ViolationRecord {
    rule: Rule,
    row: Option<usize>,
    col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<usize>>,
    detail: String,
}

impl From<Violation> for ViolationRecord {
    fn from(v: Violation) -> Self {
        let (row, col, rows) = match v.location {
            Location::Row(r) => (Some(r), None, None),
            Location::Column { col, rows } => (None, Some(col), Some(rows)),
            Location::Cell { row, col } => (Some(row), Some(col), None),
        };
        ViolationRecord { rule: v.rule, row, col, rows, detail: v.detail }
    }
}

impl TryFrom<ViolationRecord> for Violation {
    type Error = String;

    fn try_from(r: ViolationRecord) -> Result<Self, String> {
        let location = match (r.rule, r.row, r.col, r.rows) {
            (Rule::EmptyRow, Some(row), None, None) => Location::Row(row),
            (Rule::InconsistentColumn, None, Some(col), Some(rows)) => Location::Column { col, rows },
            (Rule::EmptyRow | Rule::InconsistentColumn, ..) => {
                return Err(format!("location does not fit rule {}", r.rule))
            }
            (_, Some(row), Some(col), None) => Location::Cell { row, col },
            _ => return Err(format!("location does not fit rule {}", r.rule)),
        };
        Ok(Violation { rule: r.rule, location, detail: r.detail })
    }
}

impl Violation {
    /// Anchor coordinates of the cells this violation marks as violating.
    fn cells(&self, t: &Table) -> Vec<(usize, usize)> {
        match &self.location {
            Location::Row(r) => t
                .rows()
                .nth(*r)
                .map(|row| row.iter().map(|c| (c.row, c.col)).collect())
                .unwrap_or_default(),
            Location::Column { col, rows } => rows.iter().map(|&r| (r, *col)).collect(),
            Location::Cell { row, col } => vec![(*row, *col)],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Location::Row(r) => write!(f, "{} at row {}: {}", self.rule, r, self.detail),
            Location::Column { col, rows } => {
                let rows: Vec<String> = rows.iter().map(usize::to_string).collect();
                write!(f, "{} at column {} (rows {}): {}", self.rule, col, rows.join(", "), self.detail)
            }
            Location::Cell { row, col } => {
                write!(f, "{} at row {}, column {}: {}", self.rule, row, col, self.detail)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub coverage: f64,
    pub hallucination_rate: f64,
    pub goodness_score: f64,
    pub badness_score: f64,
    /// Largest share of violating cells within a single column.
    pub max_column_badness: f64,
    pub consistent_cells: usize,
    pub violating_cells: usize,
    pub total_cells: usize,
}

impl ValidationReport {
    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> BTreeSet<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadnessMode {
    /// Violating cells over all body cells.
    #[default]
    Global,
    /// The worst single column.
    MaxColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceThresholds {
    pub min_coverage: f64,
    pub max_hallucination: f64,
    pub max_badness: f64,
    pub min_goodness: f64,
    pub badness_mode: BadnessMode,
}

impl Default for ConvergenceThresholds {
    fn default() -> Self {
        ConvergenceThresholds {
            min_coverage: 0.90,
            max_hallucination: 0.20,
            max_badness: 0.30,
            min_goodness: 0.50,
            badness_mode: BadnessMode::Global,
        }
    }
}

impl ConvergenceThresholds {
    /// Bounds every report satisfies.
    pub fn vacuous() -> Self {
        ConvergenceThresholds {
            min_coverage: 0.0,
            max_hallucination: 1.0,
            max_badness: 1.0,
            min_goodness: 0.0,
            badness_mode: BadnessMode::Global,
        }
    }
}

pub fn is_converged(report: &ValidationReport, c: &ConvergenceThresholds) -> bool {
    let badness = match c.badness_mode {
        BadnessMode::Global => report.badness_score,
        BadnessMode::MaxColumn => report.max_column_badness,
    };
    report.coverage >= c.min_coverage
        && report.hallucination_rate <= c.max_hallucination
        && badness <= c.max_badness
        && report.goodness_score >= c.min_goodness
}

/// Which body cells (by anchor `(row, col)`) count as consistent and which as
/// violating. The two sets never overlap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellClassification {
    pub consistent: BTreeSet<(usize, usize)>,
    pub violating: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SanityChecker {
    pub patterns: EntityPatterns,
    pub entity_threshold: f64,
    pub signature_threshold: f64,
}

impl Default for SanityChecker {
    fn default() -> Self {
        SanityChecker {
            patterns: EntityPatterns::default(),
            entity_threshold: 0.8,
            signature_threshold: 0.8,
        }
    }
}

static DEFAULT_CHECKER: LazyLock<SanityChecker> = LazyLock::new(SanityChecker::default);

struct ColumnPass {
    kinds: Vec<Option<EntityKind>>,
    violations: Vec<Violation>,
    consistent: BTreeSet<(usize, usize)>,
}

impl SanityChecker {
    pub fn with_patterns(patterns: EntityPatterns) -> Self {
        SanityChecker { patterns, ..Default::default() }
    }

    pub fn detect_entity_type<'a, I>(&self, column: I) -> Option<EntityType>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.patterns
            .detect(column, self.entity_threshold)
            .map(|k| self.patterns.get(k).clone())
    }

    fn column_pass(&self, t: &Table) -> ColumnPass {
        let mut pass = ColumnPass { kinds: Vec::new(), violations: Vec::new(), consistent: BTreeSet::new() };
        for (col, column) in rules::body_columns(t).iter().enumerate() {
            let verdict = rules::analyze_column(
                &self.patterns,
                self.entity_threshold,
                self.signature_threshold,
                col,
                column,
            );
            pass.kinds.push(verdict.kind);
            pass.consistent.extend(verdict.consistent_rows.iter().map(|&r| (r, col)));
            pass.violations.extend(verdict.violation);
        }
        pass
    }

    /// Entity voting per body column, falling back to signature majority.
    /// Returns the `Inconsistent Column` findings and the number of cells
    /// that agree with their column.
    pub fn check_entity_consistency(&self, t: &Table) -> (Vec<Violation>, usize) {
        let pass = self.column_pass(t);
        (pass.violations, pass.consistent.len())
    }

    pub fn signature_analysis(&self, col: usize, column: &[(usize, &str)]) -> Vec<Violation> {
        rules::signature_analysis(self.signature_threshold, col, column)
    }

    pub fn detect_merged_cells(&self, t: &Table) -> Vec<Violation> {
        rules::detect_merged_cells(&self.patterns, t, &self.column_pass(t).kinds)
    }

    fn violations_with(&self, t: &Table, pass: &ColumnPass) -> Vec<Violation> {
        let mut out = rules::detect_empty_rows(t);
        out.extend(pass.violations.iter().cloned());
        // Per-cell rules, reported cell by cell in reading order.
        let mut per_cell: BTreeMap<(usize, usize), Vec<Violation>> = BTreeMap::new();
        let merged = rules::detect_merged_cells(&self.patterns, t, &pass.kinds);
        let brackets = rules::detect_unbalanced_brackets(t);
        let delims = rules::detect_delimiter_errors(t);
        for v in merged.into_iter().chain(brackets).chain(delims) {
            if let Location::Cell { row, col } = v.location {
                per_cell.entry((row, col)).or_default().push(v);
            }
        }
        out.extend(per_cell.into_values().flatten());
        out
    }

    pub fn classify(&self, t: &Table) -> CellClassification {
        let pass = self.column_pass(t);
        self.classify_with(t, &pass, &self.violations_with(t, &pass))
    }

    fn classify_with(&self, t: &Table, pass: &ColumnPass, violations: &[Violation]) -> CellClassification {
        let violating: BTreeSet<(usize, usize)> = violations.iter().flat_map(|v| v.cells(t)).collect();
        let consistent = pass.consistent.difference(&violating).copied().collect();
        CellClassification { consistent, violating }
    }

    pub fn run(&self, source: &SourceText, t: &Table) -> ValidationReport {
        let pass = self.column_pass(t);
        let violations = self.violations_with(t, &pass);
        let classes = self.classify_with(t, &pass, &violations);
        // Blank padding only counts once a rule flags it.
        let scored = |c: &&Cell| !c.is_blank() || classes.violating.contains(&(c.row, c.col));
        let total = t.body_cells().filter(scored).count();
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };

        let mut per_column: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for cell in t.body_cells().filter(scored) {
            let entry = per_column.entry(cell.col).or_default();
            entry.1 += 1;
            if classes.violating.contains(&(cell.row, cell.col)) {
                entry.0 += 1;
            }
        }
        let max_column_badness = per_column
            .values()
            .map(|&(bad, all)| ratio(bad, all))
            .fold(0.0, f64::max);

        ValidationReport {
            coverage: compute_coverage(source, t),
            hallucination_rate: compute_hallucination(source, t),
            goodness_score: ratio(classes.consistent.len(), total),
            badness_score: ratio(classes.violating.len(), total),
            max_column_badness,
            consistent_cells: classes.consistent.len(),
            violating_cells: classes.violating.len(),
            total_cells: total,
            violations,
        }
    }
}

pub fn detect_empty_rows(t: &Table) -> Vec<Violation> {
    rules::detect_empty_rows(t)
}

/// Entity type matched by at least 80% of the non-blank cells.
pub fn detect_entity_type<'a, I>(column: I) -> Option<EntityType>
where
    I: IntoIterator<Item = &'a str>,
{
    DEFAULT_CHECKER.detect_entity_type(column)
}

pub fn check_entity_consistency(t: &Table) -> (Vec<Violation>, usize) {
    DEFAULT_CHECKER.check_entity_consistency(t)
}

/// `column` holds `(row, text)` pairs of one body column.
pub fn signature_analysis(col: usize, column: &[(usize, &str)]) -> Vec<Violation> {
    DEFAULT_CHECKER.signature_analysis(col, column)
}

pub fn detect_merged_cells(t: &Table) -> Vec<Violation> {
    DEFAULT_CHECKER.detect_merged_cells(t)
}

pub fn detect_delimiter_errors(t: &Table) -> Vec<Violation> {
    rules::detect_delimiter_errors(t)
}

pub fn detect_unbalanced_brackets(t: &Table) -> Vec<Violation> {
    rules::detect_unbalanced_brackets(t)
}

pub fn run_sanity_check(source: &SourceText, t: &Table) -> ValidationReport {
    DEFAULT_CHECKER.run(source, t)
}
