//! Simulator profile files: a JSON object keyed by backend id, then mode
//! name, plus an optional `schema_version` key.

use std::path::Path;

use routebench_core::analysis::CellValues;
use routebench_core::sim::{calibrate_entry, CellTargets};
use routebench_core::{schema_versions, SimulatorProfile, TaskPrompt};
use serde_json::Value;

use crate::error::{Error, Result};

pub fn load_profile(path: &Path) -> Result<SimulatorProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::Malformed {
        path: path.into(),
        line,
        message,
    };
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| malformed(e.line(), e.to_string()))?;
    if let Some(obj) = doc.as_object_mut() {
        if let Some(v) = obj.remove("schema_version") {
            if v != schema_versions::SIMULATOR_PROFILE {
                return Err(malformed(
                    1,
                    format!("schema {v} is not {}", schema_versions::SIMULATOR_PROFILE),
                ));
            }
        }
    }
    let profile: SimulatorProfile = serde_json::from_value(doc).map_err(|e| malformed(0, e.to_string()))?;
    profile.validate()?;
    Ok(profile)
}

pub fn profile_json(profile: &SimulatorProfile) -> Result<String> {
    let mut doc = serde_json::to_value(profile)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("schema_version".into(), schema_versions::SIMULATOR_PROFILE.into());
    }
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Fits one simulator entry per cell. Rates come from the cell
/// percentages; the state fraction and per-request token mean come from
/// the pool the profile will be run against. A cell without SR gets a
/// state success rate of one.
pub fn calibrate(cells: &[CellValues], pool: &[TaskPrompt]) -> Result<SimulatorProfile> {
    if pool.is_empty() {
        return Err(Error::Usage("calibration needs a non-empty pool".into()));
    }
    let q = pool.iter().filter(|p| p.state_sensitive).count() as f64 / pool.len() as f64;
    let mut profile = SimulatorProfile::default();
    for c in cells {
        let p50 = c
            .p50_ms
            .ok_or_else(|| Error::Usage(format!("cell {}/{} has no p50 to calibrate latency", c.backend, c.mode)))?;
        let fc = c.fc_pct / 100.0;
        let targets = CellTargets {
            fc,
            ra: c.ra_pct / 100.0,
            sr: c.sr_pct.map_or(fc, |s| s / 100.0),
            p50_ms: p50,
            tokens_per_request: c.tokens / pool.len() as f64,
        };
        profile.insert(&c.backend, c.mode, calibrate_entry(targets, q));
    }
    profile.validate()?;
    Ok(profile)
}
