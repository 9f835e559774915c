//! Burden profiles, the factorial matrix and request assembly.
//!
//! A profile fixes how much structure the model has to produce
//! (serialization) and where the final record is realized. Transport and
//! constraint are an overlay applied to every profile.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compact::{parse_compact, reconstruct, COMPACT_GRAMMAR};
use crate::error::{Error, Result};
use crate::prompt::TaskPrompt;
use crate::record::{parse_control_record, ControlRecord, ParseFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "MJ")]
    Mj,
    #[serde(rename = "SJ")]
    Sj,
    #[serde(rename = "MJS")]
    Mjs,
    #[serde(rename = "MCLR")]
    Mclr,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Self::Mj, Self::Sj, Self::Mjs, Self::Mclr];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mj => "MJ",
            Self::Sj => "SJ",
            Self::Mjs => "MJS",
            Self::Mclr => "MCLR",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| alloc::format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Limited,
    Unlimited,
}

impl Constraint {
    pub const ALL: [Constraint; 2] = [Self::Limited, Self::Unlimited];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Limited => "limited",
            Self::Unlimited => "unlimited",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Constraint {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| alloc::format!("unknown constraint `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    NonStream,
    Stream,
}

impl Transport {
    pub const ALL: [Transport; 2] = [Self::NonStream, Self::Stream];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NonStream => "non_stream",
            Self::Stream => "stream",
        }
    }

    pub fn is_stream(self) -> bool {
        self == Self::Stream
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s) || (s == "non-stream" && *t == Self::NonStream))
            .ok_or_else(|| alloc::format!("unknown transport `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Serialization {
    FinalJson,
    CompactCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationLocus {
    Model,
    LocalReconstruction,
}

/// Output-token caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Profile budget of MJ and MCLR.
    pub small: u32,
    /// Profile budget of SJ and MJS.
    pub relaxed: u32,
    /// Cap applied to every profile under the unlimited constraint.
    pub unlimited: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            small: 64,
            relaxed: 512,
            unlimited: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BurdenProfile {
    pub mode: Mode,
    pub serialization: Serialization,
    pub realization_locus: RealizationLocus,
    pub output_token_budget: u32,
    pub prompt_template_id: String,
}

impl BurdenProfile {
    pub fn for_mode(mode: Mode, budgets: &Budgets) -> Self {
        let (serialization, realization_locus, budget, template) = match mode {
            Mode::Mj => (
                Serialization::FinalJson,
                RealizationLocus::Model,
                budgets.small,
                "json_v1",
            ),
            Mode::Sj | Mode::Mjs => (
                Serialization::FinalJson,
                RealizationLocus::Model,
                budgets.relaxed,
                "json_v1",
            ),
            Mode::Mclr => (
                Serialization::CompactCode,
                RealizationLocus::LocalReconstruction,
                budgets.small,
                "compact_v1",
            ),
        };
        Self {
            mode,
            serialization,
            realization_locus,
            output_token_budget: budget,
            prompt_template_id: template.to_string(),
        }
    }
}

/// The four factor levels identifying one cell of the matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComboKey {
    pub mode: Mode,
    pub backend: String,
    pub constraint: Constraint,
    pub transport: Transport,
}

impl fmt::Display for ComboKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.backend, self.mode, self.constraint, self.transport
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComboSpec {
    pub profile: BurdenProfile,
    pub backend: String,
    pub constraint: Constraint,
    pub transport: Transport,
    /// Output-token cap after the constraint overlay.
    pub unlimited_cap: u32,
}

impl ComboSpec {
    pub fn key(&self) -> ComboKey {
        ComboKey {
            mode: self.profile.mode,
            backend: self.backend.clone(),
            constraint: self.constraint,
            transport: self.transport,
        }
    }

    pub fn max_tokens(&self) -> u32 {
        match self.constraint {
            Constraint::Limited => self.profile.output_token_budget,
            Constraint::Unlimited => self.unlimited_cap,
        }
    }
}

fn default_backends() -> Vec<String> {
    ["gemini", "llama", "openai"].iter().map(|s| s.to_string()).collect()
}

/// Factor levels of the benchmark matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixConfig {
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_backends")]
    pub backends: Vec<String>,
    #[serde(default = "default_constraints")]
    pub constraints: Vec<Constraint>,
    #[serde(default = "default_transports")]
    pub transports: Vec<Transport>,
    #[serde(default)]
    pub budgets: Budgets,
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_constraints() -> Vec<Constraint> {
    Constraint::ALL.to_vec()
}

fn default_transports() -> Vec<Transport> {
    Transport::ALL.to_vec()
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            backends: default_backends(),
            constraints: default_constraints(),
            transports: default_transports(),
            budgets: Budgets::default(),
        }
    }
}

fn sorted_unique<T: Ord + Clone>(levels: &[T]) -> Vec<T> {
    let mut v = levels.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Enumerates the matrix in (mode, backend, constraint, transport) order.
/// Modes, constraints and transports follow their declared order; backends
/// keep the order given in the config.
pub fn enumerate_matrix(config: &MatrixConfig) -> Result<Vec<ComboSpec>> {
    let modes = sorted_unique(&config.modes);
    let constraints = sorted_unique(&config.constraints);
    let transports = sorted_unique(&config.transports);
    let mut backends: Vec<String> = Vec::new();
    for b in &config.backends {
        if !backends.contains(b) {
            backends.push(b.clone());
        }
    }
    if modes.is_empty() {
        return Err(Error::EmptyFactor("mode"));
    }
    if backends.is_empty() {
        return Err(Error::EmptyFactor("backend"));
    }
    if constraints.is_empty() {
        return Err(Error::EmptyFactor("constraint"));
    }
    if transports.is_empty() {
        return Err(Error::EmptyFactor("transport"));
    }

    let mut out = Vec::with_capacity(modes.len() * backends.len() * constraints.len() * transports.len());
    for &mode in &modes {
        let profile = BurdenProfile::for_mode(mode, &config.budgets);
        for backend in &backends {
            for &constraint in &constraints {
                for &transport in &transports {
                    out.push(ComboSpec {
                        profile: profile.clone(),
                        backend: backend.clone(),
                        constraint,
                        transport,
                        unlimited_cap: config.budgets.unlimited,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// OpenAI-compatible chat-completions request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatPayload {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub stream: bool,
}

/// A prompt template with `[system]` and `[user]` sections.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub id: &'static str,
    pub system: &'static str,
    pub user: &'static str,
}

const JSON_V1: &str = include_str!("../templates/json_v1.txt");
const COMPACT_V1: &str = include_str!("../templates/compact_v1.txt");

fn split_template(id: &'static str, text: &'static str) -> Template {
    let body = text.strip_prefix("[system]\n").unwrap_or(text);
    let (system, user) = body.split_once("\n[user]\n").unwrap_or((body, "{{request}}\n"));
    Template {
        id,
        system,
        user: user.trim_end_matches('\n'),
    }
}

/// Looks up a shipped template by id.
pub fn template(id: &str) -> Result<Template> {
    match id {
        "json_v1" => Ok(split_template("json_v1", JSON_V1)),
        "compact_v1" => Ok(split_template("compact_v1", COMPACT_V1)),
        other => Err(Error::UnknownTemplate(other.to_string())),
    }
}

fn fill(text: &str, request: &str) -> String {
    text.replace("{{grammar}}", COMPACT_GRAMMAR)
        .replace("{{request}}", request)
}

/// Builds the backend request for one prompt under one combo.
pub fn assemble_request(combo: &ComboSpec, prompt: &TaskPrompt) -> Result<ChatPayload> {
    let tpl = template(&combo.profile.prompt_template_id)?;
    Ok(ChatPayload {
        model: combo.backend.clone(),
        messages: alloc::vec![
            ChatMessage {
                role: "system".to_string(),
                content: fill(tpl.system, &prompt.text),
            },
            ChatMessage {
                role: "user".to_string(),
                content: fill(tpl.user, &prompt.text),
            },
        ],
        max_tokens: combo.max_tokens(),
        stream: combo.transport.is_stream(),
    })
}

/// Turns a fully assembled model output into a record, using the codec the
/// profile's serialization calls for.
pub fn realize(combo: &ComboSpec, raw_output: &str) -> core::result::Result<ControlRecord, ParseFailure> {
    realize_with(combo.profile.serialization, raw_output)
}

pub fn realize_with(
    serialization: Serialization,
    raw_output: &str,
) -> core::result::Result<ControlRecord, ParseFailure> {
    match serialization {
        Serialization::FinalJson => parse_control_record(raw_output),
        Serialization::CompactCode => reconstruct(&parse_compact(raw_output)?),
    }
}
