//! Core of the routebench harness.
//!
//! Everything in this crate is pure computation over in-memory values: the
//! routing control record and its validator, the compact line codec, burden
//! profiles and request assembly, the deterministic backend simulator, metric
//! aggregation, factorial statistics and the deployment recommender. File
//! formats, HTTP and the CLI live in the `routebench` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod compact;
pub mod error;
pub mod math;
pub mod metrics;
pub mod outcome;
pub mod profile;
pub mod prompt;
pub mod recommend;
pub mod record;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;

pub use compact::{emit_compact, parse_compact, reconstruct, CompactCode, COMPACT_GRAMMAR};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, percentile, wlc, MetricSummary};
pub use outcome::RequestOutcome;
pub use profile::{
    assemble_request, enumerate_matrix, realize, BurdenProfile, ChatMessage, ChatPayload, ComboSpec, Constraint,
    MatrixConfig, Mode, Transport,
};
pub use prompt::{judge_state_retention, StateExpectation, Stratum, TaskPrompt};
pub use record::{parse_control_record, validate_schema, ControlRecord, FailureClass, RouteLabel, Violation};
pub use sim::{estimate_tokens, simulate, SimulatorEntry, SimulatorProfile};

/// Version tags of every file format the harness reads or writes.
pub mod schema_versions {
    pub const CONTROL_RECORD: &str = "routebench.control_record.v1";
    pub const PROMPT_POOL: &str = "routebench.prompt_pool.v1";
    pub const OUTCOME_LOG: &str = "routebench.outcome_log.v1";
    pub const MATRIX_CONFIG: &str = "routebench.matrix_config.v1";
    pub const SIMULATOR_PROFILE: &str = "routebench.simulator_profile.v1";
    pub const METRIC_TABLES: &str = "routebench.metric_tables.v1";
    pub const POLICY: &str = "routebench.policy.v1";
    pub const VERDICT: &str = "routebench.verdict.v1";
}
