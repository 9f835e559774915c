//! Prompt pool entries and the state-retention rule.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{ControlRecord, RouteLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Simple,
    Complex,
    Edge,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Self::Simple, Self::Complex, Self::Edge];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Complex => "complex",
            Self::Edge => "edge",
        }
    }
}

/// What a state-sensitive prompt must produce to count as state retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateExpectation {
    pub route: RouteLabel,
    pub memory: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub id: String,
    pub text: String,
    pub ground_truth_route: RouteLabel,
    pub stratum: Stratum,
    #[serde(default)]
    pub state_sensitive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_state_behavior: Option<StateExpectation>,
}

impl TaskPrompt {
    pub fn check(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::InvalidPool("prompt with empty id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(Error::InvalidPool(format!("prompt `{}` has empty text", self.id)));
        }
        if self.state_sensitive && self.expected_state_behavior.is_none() {
            return Err(Error::InvalidPool(format!(
                "state-sensitive prompt `{}` has no expected_state_behavior",
                self.id
            )));
        }
        Ok(())
    }
}

/// Validates a whole pool: per-prompt invariants, unique ids, the configured
/// size and route coverage inside every stratum.
pub fn validate_pool(pool: &[TaskPrompt], expected_size: usize) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::InvalidPool("pool is empty".into()));
    }
    let mut ids: Vec<&str> = Vec::with_capacity(pool.len());
    for p in pool {
        p.check()?;
        ids.push(&p.id);
    }
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidPool(format!("duplicate prompt id `{}`", w[0])));
    }
    if pool.len() != expected_size {
        return Err(Error::InvalidPool(format!(
            "pool has {} prompts, config expects {expected_size}",
            pool.len()
        )));
    }
    for stratum in Stratum::ALL {
        for route in RouteLabel::ALL {
            if !pool
                .iter()
                .any(|p| p.stratum == stratum && p.ground_truth_route == route)
            {
                return Err(Error::InvalidPool(format!(
                    "no `{route}` prompts in stratum `{}`",
                    stratum.as_str()
                )));
            }
        }
    }
    Ok(())
}

/// Deterministic state-retention check: route and memory flag must both
/// match the expectation. Returns `None` for prompts that are not
/// state-sensitive.
pub fn judge_state_retention(prompt: &TaskPrompt, record: &ControlRecord) -> Option<bool> {
    if !prompt.state_sensitive {
        return None;
    }
    let expected = prompt.expected_state_behavior?;
    Some(record.route == expected.route && record.memory_flag == expected.memory)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_prompt() -> TaskPrompt {
        TaskPrompt {
            id: "s1".into(),
            text: "Resume the reminder list we were editing".into(),
            ground_truth_route: RouteLabel::Task,
            stratum: Stratum::Complex,
            state_sensitive: true,
            expected_state_behavior: Some(StateExpectation {
                route: RouteLabel::Task,
                memory: true,
            }),
        }
    }

    #[test]
    fn retained_when_route_and_memory_match() {
        let rec = ControlRecord::new(RouteLabel::Task, 0.8, true, true, "resume").unwrap();
        assert_eq!(judge_state_retention(&state_prompt(), &rec), Some(true));
    }

    #[test]
    fn lost_when_memory_flag_dropped() {
        let rec = ControlRecord::new(RouteLabel::Task, 0.8, false, true, "resume").unwrap();
        assert_eq!(judge_state_retention(&state_prompt(), &rec), Some(false));
    }

    #[test]
    fn not_applicable_for_plain_prompts() {
        let mut p = state_prompt();
        p.state_sensitive = false;
        p.expected_state_behavior = None;
        let rec = ControlRecord::new(RouteLabel::Task, 0.8, true, true, "resume").unwrap();
        assert_eq!(judge_state_retention(&p, &rec), None);
    }

    fn full_pool() -> Vec<TaskPrompt> {
        let mut pool = Vec::new();
        for (si, stratum) in Stratum::ALL.into_iter().enumerate() {
            for (ri, route) in RouteLabel::ALL.into_iter().enumerate() {
                pool.push(TaskPrompt {
                    id: format!("p{si}{ri}"),
                    text: "text".into(),
                    ground_truth_route: route,
                    stratum,
                    state_sensitive: false,
                    expected_state_behavior: None,
                });
            }
        }
        pool
    }

    #[test]
    fn pool_validation() {
        let pool = full_pool();
        assert!(validate_pool(&pool, 12).is_ok());
        assert!(validate_pool(&pool, 324).is_err());
        assert!(validate_pool(&[], 0).is_err());

        let gap: Vec<_> = pool
            .iter()
            .filter(|p| !(p.stratum == Stratum::Edge && p.ground_truth_route == RouteLabel::Doc))
            .cloned()
            .collect();
        let err = validate_pool(&gap, 11).unwrap_err();
        assert!(matches!(err, Error::InvalidPool(m) if m.contains("doc") && m.contains("edge")));
    }

    #[test]
    fn state_sensitive_needs_expectation() {
        let mut p = state_prompt();
        p.expected_state_behavior = None;
        assert!(p.check().is_err());
    }
}
