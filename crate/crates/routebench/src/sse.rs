//! Chat-completions wire bodies: server-sent event streams and plain JSON
//! responses, in both directions.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("stream ended before [DONE]")]
    Truncated,
    #[error("bad chunk: {0}")]
    BadChunk(String),
    #[error("read failed: {0}")]
    Read(String),
    /// The underlying read timed out.
    #[error("read timed out")]
    TimedOut,
}

fn usage_of(v: &Value) -> Option<Usage> {
    v.get("usage").and_then(|u| Usage::deserialize(u).ok())
}

/// Parses a non-streaming response body.
pub fn parse_completion_body(body: &str) -> Result<Completion, WireError> {
    let v: Value = serde_json::from_str(body).map_err(|e| WireError::BadChunk(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| WireError::BadChunk("no choices[0].message.content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        usage: usage_of(&v),
    })
}

fn apply_event(data: &str, out: &mut Completion) -> Result<bool, WireError> {
    if data.trim() == "[DONE]" {
        return Ok(true);
    }
    let v: Value = serde_json::from_str(data).map_err(|e| WireError::BadChunk(e.to_string()))?;
    if let Some(choices) = v.get("choices").and_then(Value::as_array) {
        for c in choices {
            if let Some(piece) = c.pointer("/delta/content").and_then(Value::as_str) {
                out.text.push_str(piece);
            }
        }
    }
    if let Some(u) = usage_of(&v) {
        out.usage = Some(u);
    }
    Ok(false)
}

/// Reads an event stream to `[DONE]`, concatenating content deltas in
/// arrival order.
pub fn read_sse<R: BufRead>(reader: R) -> Result<Completion, WireError> {
    let mut out = Completion {
        text: String::new(),
        usage: None,
    };
    let mut data = String::new();
    let mut pending = false;
    for line in reader.lines() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => WireError::TimedOut,
            _ => WireError::Read(e.to_string()),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            if pending && apply_event(&data, &mut out)? {
                return Ok(out);
            }
            data.clear();
            pending = false;
            continue;
        }
        if line.starts_with(':') {
            continue;
        }
        let (field, value) = match line.split_once(':') {
            Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
            None => (line, ""),
        };
        if field == "data" {
            if pending {
                data.push('\n');
            }
            data.push_str(value);
            pending = true;
        }
    }
    if pending && apply_event(&data, &mut out)? {
        return Ok(out);
    }
    Err(WireError::Truncated)
}

/// Encodes `text` as a non-streaming response body.
pub fn encode_completion_body(model: &str, text: &str, usage: Usage) -> String {
    json!({
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
        "usage": usage,
    })
    .to_string()
}

/// Encodes `text` as an event stream of `chunk_chars`-sized deltas, a usage
/// chunk and the `[DONE]` terminator.
pub fn encode_sse(model: &str, text: &str, chunk_chars: usize, usage: Usage) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut s = String::new();
    for piece in chars.chunks(chunk_chars.max(1)) {
        let piece: String = piece.iter().collect();
        let chunk = json!({
            "object": "chat.completion.chunk",
            "model": model,
            "choices": [{"index": 0, "delta": {"content": piece}, "finish_reason": null}],
        });
        s.push_str(&format!("data: {chunk}\n\n"));
    }
    let last = json!({
        "object": "chat.completion.chunk",
        "model": model,
        "choices": [{"index": 0, "delta": {}, "finish_reason": "stop"}],
        "usage": usage,
    });
    s.push_str(&format!("data: {last}\n\ndata: [DONE]\n\n"));
    s
}
