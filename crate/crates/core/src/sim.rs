//! Deterministic backend simulator.
//!
//! Each (backend, mode) pair has an entry with a format-compliance rate, a
//! route confusion matrix, a state-retention success rate, a log-normal
//! latency and a mean token count. Draws are keyed by seed and indices only.
//!
//! Content draws (validity, route, state, corruption) are keyed by the
//! (mode, backend, constraint) cell and the request index, so streamed and
//! non-streamed deliveries of the same request carry identical text.
//! Latency and token draws also key on transport and attempt.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::compact::emit_compact;
use crate::error::{Error, Result};
use crate::math;
use crate::profile::{ComboSpec, Mode, Serialization};
use crate::prompt::TaskPrompt;
use crate::record::{ControlRecord, FailureClass, RouteLabel};
use crate::rng;

const TAG_VALID: u64 = 1;
const TAG_ROUTE: u64 = 2;
const TAG_STATE: u64 = 3;
const TAG_KIND: u64 = 4;
const TAG_CONF: u64 = 5;
const TAG_HTTP: u64 = 6;
const TAG_LATENCY: u64 = 7;
const TAG_TOKENS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub median_ms: f64,
    pub sigma: f64,
}

fn default_parse_error_share() -> f64 {
    0.84
}

/// Behavior of one backend under one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorEntry {
    pub fc_rate: f64,
    /// Row = ground-truth route, column = emitted route, label order
    /// chat, task, dev, doc.
    pub route_confusion: [[f64; 4]; 4],
    pub sr_success: f64,
    pub latency: LatencyModel,
    pub tokens_per_request: f64,
    /// Share of invalid outputs that are unparseable rather than
    /// schema-invalid.
    #[serde(default = "default_parse_error_share")]
    pub parse_error_share: f64,
    #[serde(default)]
    pub http_400_rate: f64,
    #[serde(default)]
    pub rate_limit_rate: f64,
}

impl SimulatorEntry {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("fc_rate", self.fc_rate),
            ("sr_success", self.sr_success),
            ("parse_error_share", self.parse_error_share),
            ("http_400_rate", self.http_400_rate),
            ("rate_limit_rate", self.rate_limit_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidProfile(format!("{name}={r} not in [0,1]")));
            }
        }
        if self.http_400_rate + self.rate_limit_rate > 1.0 {
            return Err(Error::InvalidProfile("http error rates exceed 1".into()));
        }
        for (i, row) in self.route_confusion.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidProfile(format!(
                    "confusion row {i} has entries outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if math::abs(sum - 1.0) > 1e-9 {
                return Err(Error::InvalidProfile(format!("confusion row {i} sums to {sum}")));
            }
        }
        if self.latency.median_ms.is_nan()
            || self.latency.median_ms <= 0.0
            || self.latency.sigma.is_nan()
            || self.latency.sigma < 0.0
        {
            return Err(Error::InvalidProfile(
                "latency needs median_ms > 0 and sigma >= 0".into(),
            ));
        }
        if self.tokens_per_request.is_nan() || self.tokens_per_request <= 0.0 {
            return Err(Error::InvalidProfile("tokens_per_request must be positive".into()));
        }
        Ok(())
    }

    fn draw_route(&self, truth: RouteLabel, u: f64) -> RouteLabel {
        let row = &self.route_confusion[truth.index()];
        if u < row[truth.index()] {
            return truth;
        }
        let mut rest = u - row[truth.index()];
        let mut last = truth;
        for r in RouteLabel::ALL.into_iter().filter(|&r| r != truth) {
            if row[r.index()] > 0.0 {
                last = r;
                if rest < row[r.index()] {
                    return r;
                }
                rest -= row[r.index()];
            }
        }
        last
    }
}

/// Simulator entries keyed by backend id, then mode name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimulatorProfile(pub BTreeMap<String, BTreeMap<String, SimulatorEntry>>);

impl SimulatorProfile {
    pub fn entry(&self, backend: &str, mode: Mode) -> Result<&SimulatorEntry> {
        self.0
            .get(backend)
            .and_then(|m| m.get(mode.as_str()))
            .ok_or_else(|| Error::MissingProfile {
                backend: backend.to_string(),
                mode: mode.as_str().to_string(),
            })
    }

    pub fn insert(&mut self, backend: &str, mode: Mode, entry: SimulatorEntry) {
        self.0
            .entry(backend.to_string())
            .or_default()
            .insert(mode.as_str().to_string(), entry);
    }

    pub fn validate(&self) -> Result<()> {
        for (backend, modes) in &self.0 {
            for (mode, entry) in modes {
                if mode.parse::<Mode>().is_err() {
                    return Err(Error::InvalidProfile(format!("{backend}: unknown mode `{mode}`")));
                }
                entry
                    .validate()
                    .map_err(|e| Error::InvalidProfile(format!("{backend}/{mode}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Everything a simulated request is keyed on.
#[derive(Debug, Clone, Copy)]
pub struct SimRequest<'a> {
    pub seed: u64,
    pub combo: &'a ComboSpec,
    pub request_index: usize,
    /// Position of the prompt among the pool's state-sensitive prompts;
    /// indexes the state-retention draw.
    pub state_rank: usize,
    pub prompt: &'a TaskPrompt,
    pub attempt: u32,
    /// Hard cap on completion tokens.
    pub completion_cap: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub raw_text: String,
    pub latency_ms: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub http_status: Option<u16>,
    pub transport: FailureClass,
}

fn str_key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

fn content_keys(req: &SimRequest<'_>, tag: u64) -> [u64; 5] {
    [
        req.seed,
        str_key(&req.combo.backend),
        req.combo.profile.mode as u64,
        req.combo.constraint as u64,
        tag,
    ]
}

fn delivery_keys(req: &SimRequest<'_>, tag: u64) -> [u64; 8] {
    [
        req.seed,
        str_key(&req.combo.backend),
        req.combo.profile.mode as u64,
        req.combo.constraint as u64,
        req.combo.transport as u64,
        req.request_index as u64,
        req.attempt as u64,
        tag,
    ]
}

/// Local token estimate used when a provider reports no usage: one token per
/// four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4).max(1)
}

fn corrupt(serialization: Serialization, record: &ControlRecord, unparseable: bool) -> String {
    match (serialization, unparseable) {
        (Serialization::FinalJson, true) => {
            let json = record.to_json();
            let cut = json
                .char_indices()
                .map(|(i, _)| i)
                .take_while(|&i| i <= json.len() / 2)
                .last()
                .unwrap_or(0);
            json[..cut].to_string()
        }
        (Serialization::FinalJson, false) => {
            let mut json = record.to_json();
            let needle = format!("\"route\":\"{}\"", record.route);
            json = json.replacen(&needle, "\"route\":\"general\"", 1);
            json
        }
        (Serialization::CompactCode, true) => {
            format!(
                "route {} confidence {}",
                record.route,
                math::round(record.confidence * 100.0)
            )
        }
        (Serialization::CompactCode, false) => {
            emit_compact(record).replacen(&format!("R={}", record.route), "R=general", 1)
        }
    }
}

/// Produces one simulated backend response.
pub fn simulate(profile: &SimulatorProfile, req: &SimRequest<'_>) -> Result<SimOutput> {
    let entry = profile.entry(&req.combo.backend, req.combo.profile.mode)?;
    let i = req.request_index as u64;
    let prompt = req.prompt;

    let z_lat = rng::standard_normal(&delivery_keys(req, TAG_LATENCY));
    let latency_ms = entry.latency.median_ms * math::exp(entry.latency.sigma * z_lat);

    let u_http = rng::uniform(&delivery_keys(req, TAG_HTTP));
    if u_http < entry.http_400_rate + entry.rate_limit_rate {
        let (status, class) = if u_http < entry.http_400_rate {
            (400, FailureClass::Http400)
        } else {
            (429, FailureClass::RateLimited)
        };
        return Ok(SimOutput {
            raw_text: String::new(),
            latency_ms,
            prompt_tokens: 0,
            completion_tokens: 0,
            http_status: Some(status),
            transport: class,
        });
    }

    let valid = rng::shifted_kronecker(&content_keys(req, TAG_VALID), i, rng::ALPHA_GOLDEN) < entry.fc_rate;
    let u_route = rng::shifted_kronecker(&content_keys(req, TAG_ROUTE), i, rng::ALPHA_BRONZE);
    let truth = prompt.ground_truth_route;

    let (route, memory) = match (prompt.state_sensitive, prompt.expected_state_behavior) {
        (true, Some(expected)) => {
            let u_state =
                rng::shifted_kronecker(&content_keys(req, TAG_STATE), req.state_rank as u64, rng::ALPHA_SILVER);
            if u_state < entry.sr_success {
                (expected.route, expected.memory)
            } else {
                (entry.draw_route(truth, u_route), !expected.memory)
            }
        }
        _ => (entry.draw_route(truth, u_route), false),
    };

    let mut conf_keys = content_keys(req, TAG_CONF).to_vec();
    conf_keys.push(i);
    let confidence_pct = 50 + rng::below(&conf_keys, 50);
    let tool = matches!(route, RouteLabel::Task | RouteLabel::Dev);
    let record = ControlRecord::new(
        route,
        confidence_pct as f64 / 100.0,
        memory,
        tool,
        format!("{route} cues in {}", prompt.id),
    )
    .map_err(|v| Error::InvalidProfile(format!("simulated record invalid: {v:?}")))?;

    let serialization = req.combo.profile.serialization;
    let raw_text = if valid {
        match serialization {
            Serialization::FinalJson => record.to_json(),
            Serialization::CompactCode => emit_compact(&record),
        }
    } else {
        let mut kind_keys = content_keys(req, TAG_KIND).to_vec();
        kind_keys.push(i);
        let unparseable = rng::uniform(&kind_keys) < entry.parse_error_share;
        corrupt(serialization, &record, unparseable)
    };

    let completion_tokens = estimate_tokens(&raw_text).min(req.completion_cap as u64);
    let z_tok = rng::standard_normal(&delivery_keys(req, TAG_TOKENS));
    let total = math::round(entry.tokens_per_request * (1.0 + 0.02 * z_tok)).max(0.0) as u64;
    let prompt_tokens = total.saturating_sub(completion_tokens);

    Ok(SimOutput {
        raw_text,
        latency_ms,
        prompt_tokens,
        completion_tokens,
        http_status: Some(200),
        transport: FailureClass::Ok,
    })
}

/// Observed cell rates a simulator entry is fitted to. Rates are fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTargets {
    pub fc: f64,
    pub ra: f64,
    pub sr: f64,
    pub p50_ms: f64,
    pub tokens_per_request: f64,
}

/// Default log-normal spread of calibrated entries.
pub const DEFAULT_LATENCY_SIGMA: f64 = 0.25;

/// Fits an entry so that expected FC, RA and SR match `targets` on a pool
/// where `state_fraction` of the prompts are state-sensitive.
///
/// A state-sensitive prompt that succeeds is routed correctly; otherwise
/// its route follows the confusion row. With diagonal accuracy `d` and
/// state success `s`, expected RA is `fc * (d + q*s*(1 - d))`.
pub fn calibrate_entry(targets: CellTargets, state_fraction: f64) -> SimulatorEntry {
    let fc = targets.fc.clamp(0.0, 1.0);
    let q = state_fraction.clamp(0.0, 1.0);
    let (s, d) = if fc > 0.0 {
        let s = (targets.sr / fc).clamp(0.0, 1.0);
        let denom = 1.0 - q * s;
        let d = if denom > 0.0 {
            ((targets.ra / fc - q * s) / denom).clamp(0.0, 1.0)
        } else {
            1.0
        };
        (s, d)
    } else {
        (0.0, 0.0)
    };
    let off = (1.0 - d) / 3.0;
    let mut confusion = [[off; 4]; 4];
    for (i, row) in confusion.iter_mut().enumerate() {
        row[i] = d;
        // Absorb rounding so the row sums to one exactly.
        let others: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p).sum();
        row[i] = 1.0 - others;
    }
    SimulatorEntry {
        fc_rate: fc,
        route_confusion: confusion,
        sr_success: s,
        latency: LatencyModel {
            median_ms: targets.p50_ms,
            sigma: DEFAULT_LATENCY_SIGMA,
        },
        tokens_per_request: targets.tokens_per_request,
        parse_error_share: default_parse_error_share(),
        http_400_rate: 0.0,
        rate_limit_rate: 0.0,
    }
}

/// Expected (FC, RA, SR) of an entry on a pool with the given state fraction.
pub fn expected_rates(entry: &SimulatorEntry, state_fraction: f64) -> (f64, f64, f64) {
    let d: f64 = (0..4).map(|i| entry.route_confusion[i][i]).sum::<f64>() / 4.0;
    let s = entry.sr_success;
    let fc = entry.fc_rate;
    let ra = fc * ((1.0 - state_fraction) * d + state_fraction * (s + (1.0 - s) * d));
    (fc, ra, fc * s)
}

/// A perfect entry: always valid, identity confusion, always retains state.
pub fn ideal_entry(median_ms: f64, tokens_per_request: f64) -> SimulatorEntry {
    let mut confusion = [[0.0; 4]; 4];
    for (i, row) in confusion.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    SimulatorEntry {
        fc_rate: 1.0,
        route_confusion: confusion,
        sr_success: 1.0,
        latency: LatencyModel {
            median_ms,
            sigma: DEFAULT_LATENCY_SIGMA,
        },
        tokens_per_request,
        parse_error_share: default_parse_error_share(),
        http_400_rate: 0.0,
        rate_limit_rate: 0.0,
    }
}

/// Profile with the same entry for every backend and mode.
pub fn uniform_profile(backends: &[String], entry: &SimulatorEntry) -> SimulatorProfile {
    let mut p = SimulatorProfile::default();
    for b in backends {
        for m in Mode::ALL {
            p.insert(b, m, entry.clone());
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::realize;
    use crate::profile::{enumerate_matrix, MatrixConfig, Transport};
    use crate::prompt::{StateExpectation, Stratum};
    use crate::record::parse_control_record;

    fn pool(n: usize) -> Vec<TaskPrompt> {
        (0..n)
            .map(|i| TaskPrompt {
                id: format!("p{i:03}"),
                text: format!("request {i}"),
                ground_truth_route: RouteLabel::ALL[i % 4],
                stratum: Stratum::ALL[i % 3],
                state_sensitive: i % 10 == 3,
                expected_state_behavior: (i % 10 == 3).then_some(StateExpectation {
                    route: RouteLabel::ALL[i % 4],
                    memory: true,
                }),
            })
            .collect()
    }

    fn run(profile: &SimulatorProfile, combo: &ComboSpec, prompts: &[TaskPrompt], seed: u64) -> Vec<SimOutput> {
        prompts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                simulate(
                    profile,
                    &SimRequest {
                        seed,
                        combo,
                        request_index: i,
                        state_rank: i,
                        prompt: p,
                        attempt: 0,
                        completion_cap: combo.max_tokens(),
                    },
                )
                .unwrap()
            })
            .collect()
    }

    fn combos() -> Vec<ComboSpec> {
        enumerate_matrix(&MatrixConfig::default()).unwrap()
    }

    #[test]
    fn ideal_entry_routes_everything_correctly() {
        let combos = combos();
        let profile = uniform_profile(
            &["gemini".into(), "llama".into(), "openai".into()],
            &ideal_entry(100.0, 300.0),
        );
        let prompts = pool(120);
        for combo in combos.iter().step_by(5) {
            for (out, p) in run(&profile, combo, &prompts, 3).iter().zip(&prompts) {
                let rec = realize(combo, &out.raw_text).unwrap();
                assert_eq!(rec.route, p.ground_truth_route);
                if p.state_sensitive {
                    assert!(rec.memory_flag);
                }
            }
        }
    }

    #[test]
    fn zero_fc_never_parses() {
        let mut entry = ideal_entry(100.0, 300.0);
        entry.fc_rate = 0.0;
        let profile = uniform_profile(&["gemini".into(), "llama".into(), "openai".into()], &entry);
        let prompts = pool(100);
        for combo in combos().iter().step_by(7) {
            let outs = run(&profile, combo, &prompts, 11);
            assert!(outs.iter().all(|o| realize(combo, &o.raw_text).is_err()));
            let parse_errors = outs
                .iter()
                .filter(|o| realize(combo, &o.raw_text).unwrap_err().class == FailureClass::JsonParseError)
                .count();
            assert!(parse_errors > 50 && parse_errors < 100);
        }
    }

    #[test]
    fn repeated_calls_are_identical() {
        let combo = &combos()[9];
        let profile = uniform_profile(
            &["gemini".into(), "llama".into(), "openai".into()],
            &calibrate_entry(
                CellTargets {
                    fc: 0.9,
                    ra: 0.6,
                    sr: 0.5,
                    p50_ms: 300.0,
                    tokens_per_request: 200.0,
                },
                0.1,
            ),
        );
        let prompts = pool(50);
        assert_eq!(run(&profile, combo, &prompts, 5), run(&profile, combo, &prompts, 5));
        assert_ne!(run(&profile, combo, &prompts, 5), run(&profile, combo, &prompts, 6));
    }

    #[test]
    fn transport_does_not_change_content() {
        let all = combos();
        let profile = uniform_profile(
            &["gemini".into(), "llama".into(), "openai".into()],
            &calibrate_entry(
                CellTargets {
                    fc: 0.7,
                    ra: 0.5,
                    sr: 0.4,
                    p50_ms: 300.0,
                    tokens_per_request: 200.0,
                },
                0.1,
            ),
        );
        let prompts = pool(60);
        for pair in all.chunks(2) {
            assert_eq!(pair[0].transport, Transport::NonStream);
            assert_eq!(pair[1].transport, Transport::Stream);
            let a = run(&profile, &pair[0], &prompts, 1);
            let b = run(&profile, &pair[1], &prompts, 1);
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.raw_text, y.raw_text);
            }
        }
    }

    #[test]
    fn completion_tokens_respect_cap_and_latency_is_positive() {
        let combo = &combos()[0];
        let profile = uniform_profile(
            &["gemini".into(), "llama".into(), "openai".into()],
            &ideal_entry(50.0, 100.0),
        );
        let prompts = pool(40);
        for (i, p) in prompts.iter().enumerate() {
            let out = simulate(
                &profile,
                &SimRequest {
                    seed: 1,
                    combo,
                    request_index: i,
                    state_rank: i,
                    prompt: p,
                    attempt: 0,
                    completion_cap: 5,
                },
            )
            .unwrap();
            assert!(out.completion_tokens <= 5);
            assert!(out.latency_ms > 0.0);
        }
    }

    #[test]
    fn missing_entry_is_an_error() {
        let combo = &combos()[0];
        let prompts = pool(1);
        let err = simulate(
            &SimulatorProfile::default(),
            &SimRequest {
                seed: 1,
                combo,
                request_index: 0,
                state_rank: 0,
                prompt: &prompts[0],
                attempt: 0,
                completion_cap: 64,
            },
        );
        assert!(matches!(err, Err(Error::MissingProfile { .. })));
    }

    #[test]
    fn calibration_inverts_expected_rates() {
        let q = 32.0 / 324.0;
        for (fc, ra, sr) in [
            (1.0, 0.8611, 0.75),
            (0.534, 0.2284, 0.125),
            (0.9714, 0.8233, 0.6875),
            (0.9992, 0.6103, 0.5608),
        ] {
            let e = calibrate_entry(
                CellTargets {
                    fc,
                    ra,
                    sr,
                    p50_ms: 100.0,
                    tokens_per_request: 10.0,
                },
                q,
            );
            e.validate().unwrap();
            let (efc, era, esr) = expected_rates(&e, q);
            assert!((efc - fc).abs() < 1e-12);
            assert!((era - ra).abs() < 1e-12, "{era} vs {ra}");
            assert!((esr - sr).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let mut e = ideal_entry(10.0, 10.0);
        e.route_confusion[2][2] = 0.9;
        assert!(e.validate().is_err());
        let mut e = ideal_entry(10.0, 10.0);
        e.fc_rate = 1.2;
        assert!(e.validate().is_err());
    }

    #[test]
    fn corrupted_json_is_classified() {
        let rec = ControlRecord::new(RouteLabel::Dev, 0.8, false, true, "r").unwrap();
        let bad = corrupt(Serialization::FinalJson, &rec, true);
        assert_eq!(
            parse_control_record(&bad).unwrap_err().class,
            FailureClass::JsonParseError
        );
        let bad = corrupt(Serialization::FinalJson, &rec, false);
        assert_eq!(
            parse_control_record(&bad).unwrap_err().class,
            FailureClass::SchemaInvalid
        );
    }
}
