//! The generate, check, critique, regenerate loop.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{is_converged, ConvergenceThresholds, SanityChecker, ValidationReport};
use crate::llm::{
    render_prompt, BackendConfig, ChatBackend, LlmError, PromptKind, Slots, NO_FINDINGS, SLOT_CRITIQUE,
    SLOT_FINDINGS, SLOT_INPUT, SLOT_TABLE,
};
use crate::table::{concat_partial_tables, parse_extraction_json, SourceText, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalSelection {
    /// Highest goodness minus badness, later iterations winning ties.
    #[default]
    BestSoFar,
    /// The last candidate that parsed.
    LastIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub max_iterations: usize,
    pub thresholds: ConvergenceThresholds,
    pub generation_prompt: PromptKind,
    pub generator: BackendConfig,
    /// Falls back to `generator` when absent.
    pub critic: Option<BackendConfig>,
    pub parse_retry_limit: usize,
    pub selection: FinalSelection,
    /// Wall-clock budget for one task, checked before each model call.
    pub task_timeout_secs: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_iterations: 5,
            thresholds: ConvergenceThresholds::default(),
            generation_prompt: PromptKind::StructuralDecomposition,
            generator: BackendConfig::default(),
            critic: None,
            parse_retry_limit: 1,
            selection: FinalSelection::BestSoFar,
            task_timeout_secs: None,
        }
    }
}

impl PipelineConfig {
    pub fn critic_config(&self) -> &BackendConfig {
        self.critic.as_ref().unwrap_or(&self.generator)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if matches!(self.generation_prompt, PromptKind::Critique | PromptKind::Regeneration) {
            return Err(format!("{} cannot be used as the generation prompt", self.generation_prompt));
        }
        if self.task_timeout_secs.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err("task_timeout_secs must be positive".into());
        }
        self.generator.validate()?;
        self.critic_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub index: usize,
    pub prompt_kind: PromptKind,
    pub prompt: String,
    pub raw_response: String,
    pub candidate: Option<Table>,
    pub report: Option<ValidationReport>,
    pub converged: bool,
    pub critique: Option<String>,
    pub parse_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    #[serde(rename = "final")]
    pub final_table: Table,
    /// Iteration whose candidate became `final_table`.
    pub final_iteration: usize,
    pub traces: Vec<IterationTrace>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl PipelineResult {
    /// `{task_id, converged, iterations, final_iteration, final, traces}`.
    pub fn trace_json(&self, task_id: &str) -> serde_json::Value {
        serde_json::json!({
            "task_id": task_id,
            "converged": self.converged,
            "iterations": self.iterations_used,
            "final_iteration": self.final_iteration,
            "final": self.final_table,
            "traces": self.traces,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("no iteration produced a parseable table")]
    NoCandidateProduced,
    #[error("no recorded response for fingerprint {0}")]
    ReplayMiss(String),
    #[error("backend failure: {0}")]
    BackendFailure(LlmError),
    #[error("task exceeded its {0:?} budget")]
    DeadlineExceeded(Duration),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

impl From<LlmError> for PipelineError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::ReplayMiss(fp) => PipelineError::ReplayMiss(fp),
            other => PipelineError::BackendFailure(other),
        }
    }
}

/// Rows as ` | `-joined cell texts, one per line, header rows first.
pub fn table_rows_text(t: &Table) -> String {
    t.rows()
        .map(|row| row.iter().map(|c| c.text.replace(['\r', '\n'], " ")).collect::<Vec<_>>().join(" | "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Checker output as the bullet list handed to the critic.
pub fn render_findings(report: &ValidationReport) -> String {
    let mut out = String::new();
    if report.violations.is_empty() {
        out.push_str(NO_FINDINGS);
    } else {
        for v in &report.violations {
            out.push_str("- ");
            out.push_str(&v.to_string());
            out.push('\n');
        }
    }
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&format!(
        "Scores: coverage {:.3}, hallucination rate {:.3}, goodness {:.3}, badness {:.3}",
        report.coverage, report.hallucination_rate, report.goodness_score, report.badness_score
    ));
    out
}

pub fn request_critique(
    candidate: &Table,
    report: &ValidationReport,
    _source: &SourceText,
    backend: &dyn ChatBackend,
) -> Result<String, LlmError> {
    let rows = table_rows_text(candidate);
    let findings = render_findings(report);
    let slots: Slots = [(SLOT_TABLE, rows.as_str()), (SLOT_FINDINGS, findings.as_str())].into();
    let prompt = render_prompt(PromptKind::Critique, &slots)?;
    backend.complete(&prompt)
}

fn try_parse(raw: &str, source: Option<&SourceText>) -> Result<Table, TableError> {
    let mut extraction = parse_extraction_json(raw)?;
    if let Some(src) = source {
        extraction.retain_known_starting_tokens(src);
    }
    concat_partial_tables(&extraction)
}

/// Outcome of [`parse_candidate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCandidate {
    pub table: Option<Table>,
    pub parse_failures: usize,
    /// The last response seen.
    pub raw_response: String,
}

/// Parses `raw`; while that fails and budget remains, asks `backend` again
/// with the same prompt.
pub fn parse_candidate(
    raw: &str,
    retry_budget: usize,
    backend: &dyn ChatBackend,
    prompt: &str,
) -> Result<ParsedCandidate, LlmError> {
    parse_candidate_in(raw, retry_budget, backend, prompt, None, None)
}

fn parse_candidate_in(
    raw: &str,
    retry_budget: usize,
    backend: &dyn ChatBackend,
    prompt: &str,
    source: Option<&SourceText>,
    deadline: Option<&Deadline>,
) -> Result<ParsedCandidate, LlmError> {
    let mut raw = raw.to_string();
    let mut failures = 0;
    loop {
        if let Ok(table) = try_parse(&raw, source) {
            return Ok(ParsedCandidate { table: Some(table), parse_failures: failures, raw_response: raw });
        }
        failures += 1;
        if failures > retry_budget || deadline.is_some_and(Deadline::passed) {
            return Ok(ParsedCandidate { table: None, parse_failures: failures, raw_response: raw });
        }
        raw = backend.complete_attempt(prompt, failures as u32)?;
    }
}

struct Deadline {
    start: Instant,
    budget: Option<Duration>,
}

impl Deadline {
    fn passed(&self) -> bool {
        self.budget.is_some_and(|b| self.start.elapsed() > b)
    }

    fn check(&self) -> Result<(), PipelineError> {
        match self.budget {
            Some(b) if self.passed() => Err(PipelineError::DeadlineExceeded(b)),
            _ => Ok(()),
        }
    }
}

/// Runs the loop for one source text.
pub fn run_ten(
    source: &SourceText,
    cfg: &PipelineConfig,
    generator: &dyn ChatBackend,
    critic: &dyn ChatBackend,
) -> Result<PipelineResult, PipelineError> {
    run_ten_with(source, cfg, generator, critic, &SanityChecker::default())
}

pub fn run_ten_with(
    source: &SourceText,
    cfg: &PipelineConfig,
    generator: &dyn ChatBackend,
    critic: &dyn ChatBackend,
    checker: &SanityChecker,
) -> Result<PipelineResult, PipelineError> {
    cfg.validate().map_err(PipelineError::InvalidConfig)?;
    let deadline = Deadline {
        start: Instant::now(),
        budget: cfg.task_timeout_secs.map(Duration::from_secs_f64),
    };
    let mut traces: Vec<IterationTrace> = Vec::new();
    // Latest parsed candidate and the critique it received.
    let mut latest: Option<(Table, Option<String>)> = None;

    for index in 1..=cfg.max_iterations {
        let (kind, prompt) = match &latest {
            Some((table, Some(critique))) => {
                let rows = table_rows_text(table);
                let slots: Slots = [(SLOT_CRITIQUE, critique.as_str()), (SLOT_TABLE, rows.as_str())].into();
                (PromptKind::Regeneration, render_prompt(PromptKind::Regeneration, &slots)?)
            }
            _ => {
                let slots: Slots = [(SLOT_INPUT, source.raw())].into();
                (cfg.generation_prompt, render_prompt(cfg.generation_prompt, &slots)?)
            }
        };
        deadline.check()?;
        let first = generator.complete(&prompt)?;
        let parsed =
            parse_candidate_in(&first, cfg.parse_retry_limit, generator, &prompt, Some(source), Some(&deadline))?;
        let mut trace = IterationTrace {
            index,
            prompt_kind: kind,
            prompt,
            raw_response: parsed.raw_response,
            candidate: parsed.table.clone(),
            report: None,
            converged: false,
            critique: None,
            parse_failures: parsed.parse_failures,
        };
        let Some(table) = parsed.table else {
            traces.push(trace);
            deadline.check()?;
            continue;
        };
        let report = checker.run(source, &table);
        trace.converged = is_converged(&report, &cfg.thresholds);
        let converged = trace.converged;
        if !converged && index < cfg.max_iterations {
            deadline.check()?;
            let critique = request_critique(&table, &report, source, critic)?;
            trace.critique = Some(critique.clone());
            latest = Some((table, Some(critique)));
        } else {
            latest = Some((table, None));
        }
        trace.report = Some(report);
        traces.push(trace);
        if converged {
            break;
        }
    }

    let final_index = select_final(&traces, cfg.selection).ok_or(PipelineError::NoCandidateProduced)?;
    let chosen = &traces[final_index];
    Ok(PipelineResult {
        final_table: chosen.candidate.clone().expect("selected iteration has a candidate"),
        final_iteration: chosen.index,
        converged: chosen.converged,
        iterations_used: traces.len(),
        traces,
    })
}

fn select_final(traces: &[IterationTrace], selection: FinalSelection) -> Option<usize> {
    let mut parsed = traces.iter().enumerate().filter(|(_, t)| t.candidate.is_some());
    if let Some((i, _)) = traces.iter().enumerate().find(|(_, t)| t.converged) {
        return Some(i);
    }
    match selection {
        FinalSelection::LastIteration => parsed.next_back().map(|(i, _)| i),
        FinalSelection::BestSoFar => parsed
            .map(|(i, t)| {
                let r = t.report.as_ref().expect("parsed iterations are checked");
                (i, r.goodness_score - r.badness_score)
            })
            .fold(None, |best: Option<(usize, f64)>, (i, score)| match best {
                Some((_, b)) if b > score => best,
                _ => Some((i, score)),
            })
            .map(|(i, _)| i),
    }
}
