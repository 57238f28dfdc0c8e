use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendConfig, ChatBackend, DecodingParams, LlmError};

/// Counting semaphore bounding requests in flight.
struct Gate {
    open: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { open: Mutex::new(permits.max(1)), freed: Condvar::new() }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut open = self.open.lock().unwrap_or_else(|p| p.into_inner());
        while *open == 0 {
            open = self.freed.wait(open).unwrap_or_else(|p| p.into_inner());
        }
        *open -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.open.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Transient(String),
    Fatal(String),
}

/// Chat-completions client: JSON POST with a bearer token, answer taken from
/// `choices[0].message.content`.
pub struct HttpBackend {
    cfg: BackendConfig,
    api_key: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn new(cfg: BackendConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::AuthMissing(cfg.api_key_env.clone()))?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: BackendConfig, api_key: impl Into<String>) -> Result<Self, LlmError> {
        cfg.validate().map_err(LlmError::Transport)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(cfg.max_in_flight);
        Ok(HttpBackend { cfg, api_key: api_key.into(), agent, gate })
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.cfg.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
        })
    }

    fn attempt_once(&self, body: &Value) -> Result<String, Failure> {
        let _slot = self.gate.enter();
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(format!("reading body: {e}")))?;
        if !(200..300).contains(&status) {
            let msg = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if status == 429 || status >= 500 { Failure::Transient(msg) } else { Failure::Fatal(msg) });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("response is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("response has no choices[0].message.content".into()))
    }
}

impl ChatBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        "http"
    }

    fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    fn params(&self) -> DecodingParams {
        self.cfg.params()
    }

    fn complete_attempt(&self, prompt: &str, _attempt: u32) -> Result<String, LlmError> {
        let body = self.request_body(prompt);
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut tries = 0;
        loop {
            match self.attempt_once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(msg)) => return Err(LlmError::Transport(msg)),
                Err(Failure::Transient(msg)) if tries >= self.cfg.retries => {
                    return Err(LlmError::Transport(format!("{msg} (after {} attempts)", tries + 1)))
                }
                Err(Failure::Transient(_)) => {
                    thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
            }
        }
    }
}
