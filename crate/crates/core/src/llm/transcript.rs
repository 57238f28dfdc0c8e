use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, DecodingParams, LlmError};

/// Hex SHA-256 of the canonical JSON form of a request.
pub fn fingerprint(prompt: &str, model_id: &str, params: DecodingParams, attempt: u32) -> String {
    // serde_json objects keep keys sorted, which fixes the canonical order.
    let canonical = serde_json::json!({
        "attempt": attempt,
        "max_output_tokens": params.max_output_tokens,
        "model_id": model_id,
        "prompt": prompt,
        "temperature": params.temperature,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub fingerprint: String,
    pub prompt: String,
    pub response: String,
    pub backend_id: String,
    pub model_id: String,
    pub params: DecodingParams,
    pub attempt: u32,
    /// RFC 3339 time of recording.
    pub timestamp: String,
}

impl ChatExchange {
    pub fn new(backend: &dyn ChatBackend, prompt: &str, attempt: u32, response: String) -> Self {
        let params = backend.params();
        ChatExchange {
            fingerprint: fingerprint(prompt, backend.model_id(), params, attempt),
            prompt: prompt.to_string(),
            response,
            backend_id: backend.backend_id().to_string(),
            model_id: backend.model_id().to_string(),
            params,
            attempt,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// One JSON file per fingerprint under a directory. Writes go through a temp
/// file and a rename, one at a time; reads take no lock.
#[derive(Debug)]
pub struct TranscriptStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl TranscriptStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| LlmError::StoreWriteFailure(format!("{}: {e}", dir.display())))?;
        Ok(TranscriptStore { dir, write_lock: Mutex::new(()) })
    }

    /// Opens an existing store without creating anything.
    pub fn open_existing(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(LlmError::StoreReadFailure(format!("{} is not a directory", dir.display())));
        }
        Ok(TranscriptStore { dir, write_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, fp: &str) -> PathBuf {
        self.dir.join(format!("{fp}.json"))
    }

    pub fn get(&self, fp: &str) -> Result<Option<ChatExchange>, LlmError> {
        let path = self.path(fp);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::StoreReadFailure(format!("{}: {e}", path.display()))),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| LlmError::StoreReadFailure(format!("{}: {e}", path.display())))
    }

    /// Persists the exchange unless one with the same fingerprint exists.
    /// Returns whether a file was written.
    pub fn put(&self, ex: &ChatExchange) -> Result<bool, LlmError> {
        let fail = |e: std::io::Error| LlmError::StoreWriteFailure(e.to_string());
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.path(&ex.fingerprint);
        if path.exists() {
            return Ok(false);
        }
        let json = serde_json::to_string_pretty(ex).map_err(|e| LlmError::StoreWriteFailure(e.to_string()))?;
        let tmp = self.dir.join(format!(".{}.tmp", ex.fingerprint));
        {
            let mut f = fs::File::create(&tmp).map_err(fail)?;
            f.write_all(json.as_bytes()).map_err(fail)?;
            f.sync_all().map_err(fail)?;
        }
        fs::rename(&tmp, &path).map_err(fail)?;
        Ok(true)
    }

    /// Fingerprints present, sorted.
    pub fn fingerprints(&self) -> Result<Vec<String>, LlmError> {
        let entries = fs::read_dir(&self.dir).map_err(|e| LlmError::StoreReadFailure(e.to_string()))?;
        let mut out: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let stem = name.strip_suffix(".json")?;
                (!stem.starts_with('.')).then(|| stem.to_string())
            })
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.fingerprints().map(|f| f.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn record_exchange(store: &TranscriptStore, exchange: &ChatExchange) -> Result<(), LlmError> {
    store.put(exchange).map(|_| ())
}

/// Serves recorded answers when present, otherwise asks the inner backend
/// and records what it says.
pub struct RecordingBackend<B> {
    inner: B,
    store: std::sync::Arc<TranscriptStore>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, store: std::sync::Arc<TranscriptStore>) -> Self {
        RecordingBackend { inner, store }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn params(&self) -> DecodingParams {
        self.inner.params()
    }

    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, LlmError> {
        let fp = fingerprint(prompt, self.model_id(), self.params(), attempt);
        if let Some(ex) = self.store.get(&fp)? {
            return Ok(ex.response);
        }
        let response = self.inner.complete_attempt(prompt, attempt)?;
        let ex = ChatExchange::new(&self.inner, prompt, attempt, response);
        self.store.put(&ex)?;
        Ok(ex.response)
    }
}

/// Answers only from a transcript store; never touches the network.
pub struct ReplayBackend {
    store: std::sync::Arc<TranscriptStore>,
    model_id: String,
    params: DecodingParams,
}

impl ReplayBackend {
    pub fn new(store: std::sync::Arc<TranscriptStore>, model_id: impl Into<String>, params: DecodingParams) -> Self {
        ReplayBackend { store, model_id: model_id.into(), params }
    }
}

impl ChatBackend for ReplayBackend {
    fn backend_id(&self) -> &str {
        "replay"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn params(&self) -> DecodingParams {
        self.params
    }

    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, LlmError> {
        let fp = fingerprint(prompt, &self.model_id, self.params, attempt);
        match self.store.get(&fp)? {
            Some(ex) => Ok(ex.response),
            None => Err(LlmError::ReplayMiss(fp)),
        }
    }
}
