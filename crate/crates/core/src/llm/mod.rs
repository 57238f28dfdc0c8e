//! Prompt rendering and chat-completion backends: a live HTTP client and a
//! record/replay layer keyed by request fingerprints.

mod backend;
mod http;
mod prompts;
mod transcript;

use thiserror::Error;

pub use backend::{BackendConfig, ChatBackend, DecodingParams, ScriptedBackend};
pub use http::HttpBackend;
pub use prompts::{
    render_prompt, PromptKind, Slots, NO_FINDINGS, SLOT_CRITIQUE, SLOT_FINDINGS, SLOT_INPUT, SLOT_TABLE,
};
pub use transcript::{
    fingerprint, record_exchange, ChatExchange, RecordingBackend, ReplayBackend, TranscriptStore,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("prompt slot {0:?} was not provided")]
    MissingSlot(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no recorded response for fingerprint {0}")]
    ReplayMiss(String),
    #[error("environment variable {0} holding the API key is not set")]
    AuthMissing(String),
    #[error("could not write transcript store: {0}")]
    StoreWriteFailure(String),
    #[error("could not read transcript store: {0}")]
    StoreReadFailure(String),
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
}
