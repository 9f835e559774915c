//! Run configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use routebench_core::{schema_versions, Constraint, MatrixConfig, Mode, Transport};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Where and how to reach one live backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub base_url: String,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Provider model name; defaults to the backend id.
    #[serde(default)]
    pub model: Option<String>,
}

fn default_schema() -> String {
    schema_versions::MATRIX_CONFIG.into()
}
fn default_requests() -> usize {
    324
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: String,
    #[serde(default)]
    pub matrix: MatrixConfig,
    #[serde(default = "default_requests")]
    pub requests_per_combo: usize,
    /// Prompt pool, relative to the config file.
    pub pool: PathBuf,
    /// Simulator profile, relative to the config file.
    #[serde(default)]
    pub simulator_profile: Option<PathBuf>,
    #[serde(default)]
    pub endpoints: BTreeMap<String, Endpoint>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency_per_backend: usize,
}

impl RunConfig {
    /// Reads a config and resolves its file references against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))?;
        if cfg.schema_version != schema_versions::MATRIX_CONFIG {
            return Err(Error::Usage(format!(
                "config schema `{}` is not {}",
                cfg.schema_version,
                schema_versions::MATRIX_CONFIG
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.pool = base.join(&cfg.pool);
        cfg.simulator_profile = cfg.simulator_profile.map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.requests_per_combo == 0 {
            return Err(Error::Usage("requests_per_combo must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Usage("max_attempts must be at least 1".into()));
        }
        if self.concurrency_per_backend == 0 {
            return Err(Error::Usage("concurrency_per_backend must be positive".into()));
        }
        Ok(())
    }

    /// Restricts the matrix with `key=value[,value...]` filters on
    /// backend, mode, constraint or transport.
    pub fn apply_filter(&mut self, filter: &str) -> Result<()> {
        let (key, values) = filter
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("matrix filter `{filter}` is not key=value")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        let bad = |what: &str, v: &str| Error::Usage(format!("unknown {what} `{v}` in matrix filter"));
        let m = &mut self.matrix;
        match key.trim() {
            "backend" => {
                for v in &values {
                    if !m.backends.iter().any(|b| b == v) {
                        return Err(bad("backend", v));
                    }
                }
                m.backends.retain(|b| values.contains(&b.as_str()));
            }
            "mode" => {
                let keep = values
                    .iter()
                    .map(|v| v.parse::<Mode>().map_err(|_| bad("mode", v)))
                    .collect::<Result<Vec<_>>>()?;
                m.modes.retain(|x| keep.contains(x));
            }
            "constraint" => {
                let keep = values
                    .iter()
                    .map(|v| v.parse::<Constraint>().map_err(|_| bad("constraint", v)))
                    .collect::<Result<Vec<_>>>()?;
                m.constraints.retain(|x| keep.contains(x));
            }
            "transport" => {
                let keep = values
                    .iter()
                    .map(|v| v.parse::<Transport>().map_err(|_| bad("transport", v)))
                    .collect::<Result<Vec<_>>>()?;
                m.transports.retain(|x| keep.contains(x));
            }
            other => return Err(Error::Usage(format!("unknown matrix filter key `{other}`"))),
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
