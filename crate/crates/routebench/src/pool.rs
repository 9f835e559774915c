//! Prompt pool files: JSONL, one prompt per line.

use std::path::Path;

use routebench_core::prompt::validate_pool;
use routebench_core::TaskPrompt;

use crate::error::{Error, Result};

/// Reads and validates a pool. Blank lines are skipped; any other line that
/// is not a prompt is reported with its line number.
pub fn load_pool(path: &Path, expected_size: usize) -> Result<Vec<TaskPrompt>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pool = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prompt: TaskPrompt = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        prompt.check().map_err(|e| Error::Malformed {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        pool.push(prompt);
    }
    if pool.is_empty() {
        return Err(Error::Malformed {
            path: path.into(),
            line: 0,
            message: "pool file has no prompts".into(),
        });
    }
    validate_pool(&pool, expected_size)?;
    Ok(pool)
}
