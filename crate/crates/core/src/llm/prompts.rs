use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::LlmError;

const STRUCTURAL_DECOMPOSITION: &str = include_str!("../../data/prompts/structural_decomposition.txt");
const CRITIQUE: &str = include_str!("../../data/prompts/critique.txt");
const REGENERATION: &str = include_str!("../../data/prompts/regeneration.txt");
const BASELINE: &str = include_str!("../../data/prompts/baseline.txt");

const STEP_BY_STEP: &str = "Let's think step by step.";

static CHAIN_OF_THOUGHT: LazyLock<String> = LazyLock::new(|| {
    BASELINE.replacen("\n\nInput:\n", &format!("\n{STEP_BY_STEP}\n\nInput:\n"), 1)
});

/// Text substituted for an empty findings slot.
pub const NO_FINDINGS: &str = "No rule-based findings: the symbolic checker reported no violations.";

pub const SLOT_INPUT: &str = "input";
pub const SLOT_TABLE: &str = "table";
pub const SLOT_FINDINGS: &str = "findings";
pub const SLOT_CRITIQUE: &str = "critique";

const PLACEHOLDERS: [(&str, &str); 4] = [
    ("{{Input Text}}", SLOT_INPUT),
    ("<Insert table rows here>", SLOT_TABLE),
    ("<Insert rule-based signals here>", SLOT_FINDINGS),
    ("<Insert critique here>", SLOT_CRITIQUE),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    StructuralDecomposition,
    Critique,
    Regeneration,
    Baseline,
    ChainOfThought,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::StructuralDecomposition,
        PromptKind::Critique,
        PromptKind::Regeneration,
        PromptKind::Baseline,
        PromptKind::ChainOfThought,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::StructuralDecomposition => STRUCTURAL_DECOMPOSITION,
            PromptKind::Critique => CRITIQUE,
            PromptKind::Regeneration => REGENERATION,
            PromptKind::Baseline => BASELINE,
            PromptKind::ChainOfThought => CHAIN_OF_THOUGHT.as_str(),
        }
    }

    /// Slot names the template declares, in order of first appearance.
    pub fn slots(self) -> Vec<&'static str> {
        let t = self.template();
        let mut found: Vec<(usize, &'static str)> = PLACEHOLDERS
            .iter()
            .filter_map(|&(ph, slot)| t.find(ph).map(|at| (at, slot)))
            .collect();
        found.sort();
        found.into_iter().map(|(_, s)| s).collect()
    }

    /// Short CLI spelling: `sd`, `critique`, `regen`, `base`, `cot`.
    pub fn short_name(self) -> &'static str {
        match self {
            PromptKind::StructuralDecomposition => "sd",
            PromptKind::Critique => "critique",
            PromptKind::Regeneration => "regen",
            PromptKind::Baseline => "base",
            PromptKind::ChainOfThought => "cot",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or_else(|| format!("unknown prompt kind {s:?} (expected sd, base, cot, critique or regen)"))
    }
}

/// Slot name to value.
pub type Slots<'a> = BTreeMap<&'a str, &'a str>;

/// Substitutes every placeholder of the template in a single pass, so slot
/// values are never themselves scanned for placeholders.
pub fn render_prompt(kind: PromptKind, slots: &Slots<'_>) -> Result<String, LlmError> {
    let template = kind.template();
    let mut out = String::with_capacity(template.len() + slots.values().map(|v| v.len()).sum::<usize>());
    let mut rest = template;
    loop {
        let next = PLACEHOLDERS
            .iter()
            .filter_map(|&(ph, slot)| rest.find(ph).map(|at| (at, ph, slot)))
            .min_by_key(|&(at, ..)| at);
        let Some((at, ph, slot)) = next else {
            out.push_str(rest);
            return Ok(out);
        };
        let value = *slots.get(slot).ok_or_else(|| LlmError::MissingSlot(slot.to_string()))?;
        out.push_str(&rest[..at]);
        if slot == SLOT_FINDINGS && value.trim().is_empty() {
            out.push_str(NO_FINDINGS);
        } else {
            out.push_str(value);
        }
        rest = &rest[at + ph.len()..];
    }
}
