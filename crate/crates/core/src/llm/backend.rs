use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams { temperature: 0.0, max_output_tokens: 4096 }
    }
}

/// A chat-completion model.
pub trait ChatBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn params(&self) -> DecodingParams;

    /// `attempt` counts earlier requests with the same prompt within one
    /// pipeline step, so re-asks after an unparseable answer are distinct
    /// requests.
    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, LlmError>;

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.complete_attempt(prompt, 0)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn params(&self) -> DecodingParams {
        (**self).params()
    }
    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, LlmError> {
        (**self).complete_attempt(prompt, attempt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: f64,
    pub retries: u32,
    /// First retry delay; each further retry doubles it.
    pub backoff_ms: u64,
    pub api_key_env: String,
    /// Concurrent requests allowed through one backend.
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4o".into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            timeout_secs: 120.0,
            retries: 3,
            backoff_ms: 500,
            api_key_env: "TEN_API_KEY".into(),
            max_in_flight: 4,
        }
    }
}

impl BackendConfig {
    pub fn params(&self) -> DecodingParams {
        DecodingParams { temperature: self.temperature, max_output_tokens: self.max_output_tokens }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(format!("timeout must be > 0, got {}", self.timeout_secs));
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }
}

type Responder = Box<dyn Fn(&str, u32) -> Result<String, LlmError> + Send + Sync>;

enum Script {
    Queue(Mutex<VecDeque<String>>),
    Func(Responder),
}

/// An in-process backend answering from a fixed queue or a function. Counts
/// calls and keeps the prompts it saw.
pub struct ScriptedBackend {
    id: String,
    model: String,
    params: DecodingParams,
    script: Script,
    calls: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    /// Responses are handed out in order; once exhausted every call fails.
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_script(Script::Queue(Mutex::new(responses.into_iter().map(Into::into).collect())))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&str, u32) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        Self::with_script(Script::Func(Box::new(f)))
    }

    fn with_script(script: Script) -> Self {
        ScriptedBackend {
            id: "scripted".into(),
            model: "scripted".into(),
            params: DecodingParams::default(),
            script,
            calls: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>, params: DecodingParams) -> Self {
        self.model = model.into();
        self.params = params;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn params(&self) -> DecodingParams {
        self.params
    }

    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts.lock().expect("prompt log poisoned").push(prompt.to_string());
        match &self.script {
            Script::Queue(q) => q.lock().expect("script poisoned").pop_front().ok_or(LlmError::ScriptExhausted),
            Script::Func(f) => f(prompt, attempt),
        }
    }
}
