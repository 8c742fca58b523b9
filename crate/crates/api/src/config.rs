use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use simworks_core::canonical;
use simworks_core::executor::ExecutorConfig;

/// Service configuration file, in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub token: String,
    pub stores: StoresConfig,
    #[serde(default)]
    pub limits: Limits,
    /// When false, read routes also require the bearer token.
    #[serde(default = "yes")]
    pub open_reads: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoresConfig {
    /// Workspace directory holding templates, registry, bundles and runs.
    pub root: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub wall_clock_ms: u64,
    pub request_timeout_ms: u64,
    pub max_sessions: u32,
    /// Runs executing at once.
    pub workers: u32,
}

impl Default for Limits {
    fn default() -> Self {
        let d = ExecutorConfig::default();
        Limits {
            wall_clock_ms: d.wall_clock.as_millis() as u64,
            request_timeout_ms: d.request_timeout.as_millis() as u64,
            max_sessions: d.max_sessions,
            workers: 4,
        }
    }
}

impl Limits {
    pub fn executor_config(&self) -> ExecutorConfig {
        ExecutorConfig {
            wall_clock: Duration::from_millis(self.wall_clock_ms),
            request_timeout: Duration::from_millis(self.request_timeout_ms),
            max_sessions: self.max_sessions,
        }
    }
}

impl ServiceConfig {
    /// Relative store roots resolve against the config file's directory.
    pub fn read(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ServiceConfig = canonical::decode(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        let root = PathBuf::from(&cfg.stores.root);
        if root.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            cfg.stores.root = base.join(root).to_string_lossy().into_owned();
        }
        if cfg.token.is_empty() {
            return Err(format!("{}: token must not be empty", path.display()));
        }
        Ok(cfg)
    }
}
