//! Backend adapters. Every adapter returns an [`Observation`]: the assembled
//! text, full-response latency, token usage and a transport class.

use std::io::BufReader;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use routebench_core::outcome::Observation;
use routebench_core::sim::SimRequest;
use routebench_core::{estimate_tokens, simulate, ChatPayload, ComboSpec, FailureClass, SimulatorProfile, TaskPrompt};

use crate::config::Endpoint;
use crate::sse::{self, Completion, Usage, WireError};

/// Identifies the request being served, for adapters that key on it.
#[derive(Debug, Clone, Copy)]
pub struct RequestContext<'a> {
    pub seed: u64,
    pub combo_index: usize,
    pub combo: &'a ComboSpec,
    pub request_index: usize,
    /// Position of the prompt among the pool's state-sensitive prompts.
    pub state_rank: usize,
    pub prompt: &'a TaskPrompt,
}

pub trait Backend: Send + Sync {
    fn complete(&self, payload: &ChatPayload, ctx: &RequestContext<'_>) -> Observation;
}

fn failed(class: FailureClass, status: Option<u16>, latency_ms: Option<f64>, attempts: u32) -> Observation {
    Observation {
        raw_text: String::new(),
        latency_ms,
        prompt_tokens: 0,
        completion_tokens: 0,
        http_status: status,
        transport: class,
        attempt_count: attempts,
        aborted: false,
    }
}

fn prompt_estimate(payload: &ChatPayload) -> u64 {
    payload.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

/// Usage from the provider when reported, else the local estimate.
fn usage_or_estimate(c: &Completion, payload: &ChatPayload) -> Usage {
    c.usage.unwrap_or_else(|| Usage {
        prompt_tokens: prompt_estimate(payload),
        completion_tokens: estimate_tokens(&c.text).min(payload.max_tokens as u64),
    })
}

/// Deterministic backend driven by a [`SimulatorProfile`]. Responses are
/// encoded to the wire format of the requested transport and decoded by the
/// same parsers the HTTP adapter uses.
pub struct SimulatedBackend {
    pub profile: SimulatorProfile,
    pub max_attempts: u32,
}

impl SimulatedBackend {
    pub fn new(profile: SimulatorProfile) -> Self {
        Self {
            profile,
            max_attempts: 3,
        }
    }
}

/// Stream chunk size used by the simulator, in characters.
const SIM_CHUNK_CHARS: usize = 7;

impl Backend for SimulatedBackend {
    fn complete(&self, payload: &ChatPayload, ctx: &RequestContext<'_>) -> Observation {
        let mut attempt = 1;
        loop {
            let req = SimRequest {
                seed: ctx.seed,
                combo: ctx.combo,
                request_index: ctx.request_index,
                state_rank: ctx.state_rank,
                prompt: ctx.prompt,
                attempt,
                completion_cap: payload.max_tokens,
            };
            let out = match simulate(&self.profile, &req) {
                Ok(o) => o,
                Err(e) => {
                    log::error!("simulator: {e}");
                    return failed(FailureClass::TransportError, None, None, attempt);
                }
            };
            match out.transport {
                FailureClass::Ok => {}
                FailureClass::RateLimited if attempt < self.max_attempts => {
                    log::debug!("simulated 429 on attempt {attempt}, retrying");
                    attempt += 1;
                    continue;
                }
                class => return failed(class, out.http_status, Some(out.latency_ms), attempt),
            }
            let usage = Usage {
                prompt_tokens: out.prompt_tokens,
                completion_tokens: out.completion_tokens,
            };
            let decoded = if payload.stream {
                let wire = sse::encode_sse(&payload.model, &out.raw_text, SIM_CHUNK_CHARS, usage);
                sse::read_sse(wire.as_bytes())
            } else {
                sse::parse_completion_body(&sse::encode_completion_body(&payload.model, &out.raw_text, usage))
            };
            return match decoded {
                Ok(c) => {
                    let usage = usage_or_estimate(&c, payload);
                    Observation {
                        raw_text: c.text,
                        latency_ms: Some(out.latency_ms),
                        prompt_tokens: usage.prompt_tokens,
                        completion_tokens: usage.completion_tokens,
                        http_status: out.http_status,
                        transport: FailureClass::Ok,
                        attempt_count: attempt,
                        aborted: false,
                    }
                }
                Err(e) => {
                    log::error!("simulator wire round trip failed: {e}");
                    failed(
                        FailureClass::TransportError,
                        out.http_status,
                        Some(out.latency_ms),
                        attempt,
                    )
                }
            };
        }
    }
}

/// Counting semaphore bounding in-flight requests to one backend.
pub struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    pub fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

pub struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl RetryPolicy {
    /// Delay before attempt `next` (2-based): backoff, 2*backoff, 4*backoff...
    pub fn delay(&self, next: u32) -> Duration {
        self.backoff * 2u32.saturating_pow(next.saturating_sub(2))
    }
}

/// One OpenAI-compatible chat-completions endpoint.
pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    model: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: Limiter,
}

enum Attempt {
    Done(Observation),
    Retry,
}

/// `http://host` and `http://host/v1` both resolve to `http://host/v1/chat/completions`.
pub fn completions_url(base_url: &str) -> String {
    let base = base_url.trim_end_matches('/');
    let base = base.strip_suffix("/v1").unwrap_or(base);
    format!("{base}/v1/chat/completions")
}

fn classify_ureq(e: &ureq::Error) -> FailureClass {
    match e {
        ureq::Error::Timeout(_) => FailureClass::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => FailureClass::Timeout,
        _ => FailureClass::TransportError,
    }
}

impl HttpBackend {
    pub fn new(
        endpoint: &Endpoint,
        api_key: Option<String>,
        timeout: Duration,
        retry: RetryPolicy,
        concurrency: usize,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: completions_url(&endpoint.base_url),
            api_key,
            model: endpoint.model.clone(),
            agent,
            retry,
            limiter: Limiter::new(concurrency),
        }
    }

    fn attempt(&self, payload: &ChatPayload, attempt: u32) -> Attempt {
        let _permit = self.limiter.acquire();
        let start = Instant::now();
        let elapsed = |start: Instant| start.elapsed().as_secs_f64() * 1000.0;
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_vec(payload).expect("payload serializes");
        let mut resp = match req.send(&body[..]) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{} attempt {attempt}: {e}", self.url);
                return Attempt::Done(failed(classify_ureq(&e), None, None, attempt));
            }
        };
        let status = resp.status().as_u16();
        log::debug!("{} attempt {attempt}: HTTP {status}", self.url);
        match status {
            200..=299 => {}
            400 => {
                return Attempt::Done(failed(
                    FailureClass::Http400,
                    Some(status),
                    Some(elapsed(start)),
                    attempt,
                ))
            }
            429 => {
                if attempt < self.retry.max_attempts {
                    log::info!("{} attempt {attempt}: rate limited, backing off", self.url);
                    return Attempt::Retry;
                }
                return Attempt::Done(failed(
                    FailureClass::RateLimited,
                    Some(status),
                    Some(elapsed(start)),
                    attempt,
                ));
            }
            401 | 403 => {
                let mut obs = failed(
                    FailureClass::TransportError,
                    Some(status),
                    Some(elapsed(start)),
                    attempt,
                );
                obs.aborted = true;
                return Attempt::Done(obs);
            }
            _ => {
                return Attempt::Done(failed(
                    FailureClass::TransportError,
                    Some(status),
                    Some(elapsed(start)),
                    attempt,
                ))
            }
        }
        let body = if payload.stream {
            sse::read_sse(BufReader::new(resp.body_mut().as_reader()))
        } else {
            match resp.body_mut().read_to_string() {
                Ok(text) => sse::parse_completion_body(&text),
                Err(e) if classify_ureq(&e) == FailureClass::Timeout => Err(WireError::TimedOut),
                Err(e) => Err(WireError::Read(e.to_string())),
            }
        };
        let latency = elapsed(start);
        match body {
            Ok(c) => {
                let usage = usage_or_estimate(&c, payload);
                Attempt::Done(Observation {
                    raw_text: c.text,
                    latency_ms: Some(latency),
                    prompt_tokens: usage.prompt_tokens,
                    completion_tokens: usage.completion_tokens,
                    http_status: Some(status),
                    transport: FailureClass::Ok,
                    attempt_count: attempt,
                    aborted: false,
                })
            }
            Err(WireError::TimedOut) => Attempt::Done(failed(FailureClass::Timeout, Some(status), None, attempt)),
            Err(e) => {
                log::warn!("{} attempt {attempt}: {e}", self.url);
                Attempt::Done(failed(
                    FailureClass::TransportError,
                    Some(status),
                    Some(latency),
                    attempt,
                ))
            }
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, payload: &ChatPayload, _ctx: &RequestContext<'_>) -> Observation {
        let mut payload = payload.clone();
        if let Some(m) = &self.model {
            payload.model = m.clone();
        }
        let mut attempt = 1;
        loop {
            match self.attempt(&payload, attempt) {
                Attempt::Done(obs) => return obs,
                Attempt::Retry => {
                    attempt += 1;
                    std::thread::sleep(self.retry.delay(attempt));
                }
            }
        }
    }
}

/// Routes each request to the adapter registered for its backend id.
pub struct BackendSet {
    backends: Vec<(String, Box<dyn Backend>)>,
}

impl BackendSet {
    pub fn new() -> Self {
        Self { backends: Vec::new() }
    }

    pub fn insert(&mut self, id: &str, backend: Box<dyn Backend>) {
        self.backends.push((id.to_string(), backend));
    }
}

impl Default for BackendSet {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for BackendSet {
    fn complete(&self, payload: &ChatPayload, ctx: &RequestContext<'_>) -> Observation {
        match self.backends.iter().find(|(id, _)| *id == ctx.combo.backend) {
            Some((_, b)) => b.complete(payload, ctx),
            None => {
                let mut obs = failed(FailureClass::TransportError, None, None, 0);
                obs.aborted = true;
                obs
            }
        }
    }
}
