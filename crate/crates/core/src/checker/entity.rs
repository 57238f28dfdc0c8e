use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_PATTERNS: &str = include_str!("../../data/entity_patterns.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Email,
    Url,
    Date,
    Time,
    Number,
    Word,
}

impl EntityKind {
    /// Tie-break order, highest priority first.
    pub const PRIORITY: [EntityKind; 6] = [
        EntityKind::Email,
        EntityKind::Url,
        EntityKind::Date,
        EntityKind::Time,
        EntityKind::Number,
        EntityKind::Word,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Email => "email",
            EntityKind::Url => "url",
            EntityKind::Date => "date",
            EntityKind::Time => "time",
            EntityKind::Number => "number",
            EntityKind::Word => "word",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::PRIORITY.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern file is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown entity kind {0:?}")]
    UnknownKind(String),
    #[error("pattern for {kind}: {source}")]
    Regex {
        kind: EntityKind,
        #[source]
        source: regex::Error,
    },
}

/// An entity kind together with the expression that recognizes it.
#[derive(Debug, Clone)]
pub struct EntityType {
    pub kind: EntityKind,
    pub pattern: Regex,
}

impl EntityType {
    pub fn matches(&self, text: &str) -> bool {
        self.pattern.is_match(text.trim())
    }
}

/// The compiled pattern set, one entry per [`EntityKind`] in priority order.
#[derive(Debug, Clone)]
pub struct EntityPatterns {
    types: Vec<EntityType>,
}

static DEFAULTS: LazyLock<EntityPatterns> = LazyLock::new(|| {
    EntityPatterns::compile(&BTreeMap::new()).expect("embedded entity patterns compile")
});

impl Default for EntityPatterns {
    fn default() -> Self {
        DEFAULTS.clone()
    }
}

impl EntityPatterns {
    /// Loads `kind = "pattern"` pairs; kinds not mentioned keep the embedded
    /// default.
    pub fn from_toml(text: &str) -> Result<Self, PatternError> {
        let overrides: BTreeMap<String, String> = toml::from_str(text)?;
        Self::compile(&overrides)
    }

    fn compile(overrides: &BTreeMap<String, String>) -> Result<Self, PatternError> {
        let defaults: BTreeMap<String, String> =
            toml::from_str(DEFAULT_PATTERNS).expect("embedded entity patterns parse");
        if let Some(unknown) = overrides.keys().find(|k| EntityKind::from_name(k).is_none()) {
            return Err(PatternError::UnknownKind(unknown.clone()));
        }
        let types = EntityKind::PRIORITY
            .into_iter()
            .map(|kind| {
                let text = overrides
                    .get(kind.name())
                    .or_else(|| defaults.get(kind.name()))
                    .expect("every kind has a default pattern");
                Regex::new(text)
                    .map(|pattern| EntityType { kind, pattern })
                    .map_err(|source| PatternError::Regex { kind, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(EntityPatterns { types })
    }

    pub fn types(&self) -> &[EntityType] {
        &self.types
    }

    pub fn get(&self, kind: EntityKind) -> &EntityType {
        self.types
            .iter()
            .find(|t| t.kind == kind)
            .expect("all kinds compiled")
    }

    pub fn matches(&self, kind: EntityKind, text: &str) -> bool {
        self.get(kind).matches(text)
    }

    /// First kind (by priority) matching the whole text.
    pub fn classify(&self, text: &str) -> Option<EntityKind> {
        self.types.iter().find(|t| t.matches(text)).map(|t| t.kind)
    }

    /// The kind matched by at least `threshold` of the non-blank cells, if
    /// any. Blank cells do not vote.
    pub fn detect<'a, I>(&self, column: I, threshold: f64) -> Option<EntityKind>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let cells: Vec<&str> = column.into_iter().filter(|c| !c.trim().is_empty()).collect();
        if cells.is_empty() {
            return None;
        }
        self.types
            .iter()
            .find(|t| {
                let hits = cells.iter().filter(|c| t.matches(c)).count();
                hits as f64 >= threshold * cells.len() as f64
            })
            .map(|t| t.kind)
    }
}
