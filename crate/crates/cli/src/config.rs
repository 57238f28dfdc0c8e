use std::path::{Path, PathBuf};

use serde::Deserialize;
use ten_core::pipeline::PipelineConfig;

pub const CACHE_DIR_ENV: &str = "TEN_CACHE_DIR";

/// Seconds allowed per task against a live backend when the config sets none.
pub const LIVE_TASK_TIMEOUT_SECS: f64 = 120.0;

/// The `--config` document: pipeline settings at the top level plus an
/// optional `cache_dir`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub cache_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: FileConfig = toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.pipeline.validate().map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// Flag, then environment, then file.
    pub fn resolve_cache_dir(&self, flag: Option<&Path>) -> Option<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| self.cache_dir.clone())
    }
}
