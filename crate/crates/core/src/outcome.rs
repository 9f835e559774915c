//! One row of the outcome log.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::profile::{realize, ComboKey, ComboSpec};
use crate::prompt::{judge_state_retention, TaskPrompt};
use crate::record::{ControlRecord, FailureClass, RouteLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub combo_index: usize,
    pub combo: ComboKey,
    pub request_index: usize,
    pub prompt_id: String,
    pub ground_truth_route: RouteLabel,
    pub state_sensitive: bool,
    pub failure_class: FailureClass,
    pub record: Option<ControlRecord>,
    pub route_correct: Option<bool>,
    pub state_retained: Option<bool>,
    /// Full-response latency; absent when no request was issued.
    pub latency_ms: Option<f64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub http_status: Option<u16>,
    pub attempt_count: u32,
    #[serde(default)]
    pub aborted: bool,
    pub raw_output: String,
    pub timestamp_ms: u64,
}

/// What the gateway observed for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub raw_text: String,
    pub latency_ms: Option<f64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub http_status: Option<u16>,
    /// Transport-level class; `Ok` means a body was received.
    pub transport: FailureClass,
    pub attempt_count: u32,
    pub aborted: bool,
}

impl RequestOutcome {
    /// Realizes the record (when the transport succeeded) and fills in the
    /// derived correctness fields.
    pub fn build(
        combo_index: usize,
        combo: &ComboSpec,
        request_index: usize,
        prompt: &TaskPrompt,
        obs: Observation,
        timestamp_ms: u64,
    ) -> Self {
        let (failure_class, record) = if obs.transport == FailureClass::Ok {
            match realize(combo, &obs.raw_text) {
                Ok(rec) => (FailureClass::Ok, Some(rec)),
                Err(f) => (f.class, None),
            }
        } else {
            (obs.transport, None)
        };
        let route_correct = record.as_ref().map(|r| r.route == prompt.ground_truth_route);
        let state_retained = record.as_ref().and_then(|r| judge_state_retention(prompt, r));
        Self {
            combo_index,
            combo: combo.key(),
            request_index,
            prompt_id: prompt.id.clone(),
            ground_truth_route: prompt.ground_truth_route,
            state_sensitive: prompt.state_sensitive,
            failure_class,
            record,
            route_correct,
            state_retained,
            latency_ms: obs.latency_ms,
            prompt_tokens: obs.prompt_tokens,
            completion_tokens: obs.completion_tokens,
            http_status: obs.http_status,
            attempt_count: obs.attempt_count,
            aborted: obs.aborted,
            raw_output: obs.raw_text,
            timestamp_ms,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Checks the row-level invariants of the log format.
    pub fn is_consistent(&self) -> bool {
        let ok = self.failure_class == FailureClass::Ok;
        if ok != self.record.is_some() || ok != self.route_correct.is_some() {
            return false;
        }
        if let (Some(rec), Some(correct)) = (&self.record, self.route_correct) {
            if (rec.route == self.ground_truth_route) != correct {
                return false;
            }
        }
        self.state_retained.is_some() == (ok && self.state_sensitive)
    }
}
