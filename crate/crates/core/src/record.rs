//! The routing control record, its validator and the failure taxonomy.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Maximum length of `reason`, in characters. Longer reasons are truncated.
pub const REASON_MAX_CHARS: usize = 512;

/// Canonical JSON keys of a control record, in emission order.
pub const RECORD_KEYS: [&str; 5] = ["route", "confidence", "memory", "tool", "reason"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteLabel {
    Chat,
    Task,
    Dev,
    Doc,
}

impl RouteLabel {
    pub const ALL: [RouteLabel; 4] = [Self::Chat, Self::Task, Self::Dev, Self::Doc];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Chat => "chat",
            Self::Task => "task",
            Self::Dev => "dev",
            Self::Doc => "doc",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Case-insensitive lookup, surrounding whitespace ignored.
    pub fn parse_loose(token: &str) -> Option<Self> {
        let token = token.trim();
        Self::ALL.into_iter().find(|r| r.as_str().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for RouteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RouteLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown route `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Ok,
    JsonParseError,
    SchemaInvalid,
    #[serde(rename = "http_400")]
    Http400,
    RateLimited,
    Timeout,
    TransportError,
}

impl FailureClass {
    pub const ALL: [FailureClass; 7] = [
        Self::Ok,
        Self::JsonParseError,
        Self::SchemaInvalid,
        Self::Http400,
        Self::RateLimited,
        Self::Timeout,
        Self::TransportError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::JsonParseError => "json_parse_error",
            Self::SchemaInvalid => "schema_invalid",
            Self::Http400 => "http_400",
            Self::RateLimited => "rate_limited",
            Self::Timeout => "timeout",
            Self::TransportError => "transport_error",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five-field routing artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub route: RouteLabel,
    pub confidence: f64,
    #[serde(rename = "memory")]
    pub memory_flag: bool,
    #[serde(rename = "tool")]
    pub tool_flag: bool,
    pub reason: String,
}

impl ControlRecord {
    /// Builds a record, enforcing the same rules as the validator.
    /// Over-long reasons are truncated.
    pub fn new(
        route: RouteLabel,
        confidence: f64,
        memory_flag: bool,
        tool_flag: bool,
        reason: impl Into<String>,
    ) -> Result<Self, Vec<Violation>> {
        let mut violations = Vec::new();
        if !(0.0..=1.0).contains(&confidence) {
            violations.push(Violation::new(".confidence", ViolationKind::OutOfRange));
        }
        let reason = truncate_reason(reason.into());
        if reason.trim().is_empty() {
            violations.push(Violation::new(".reason", ViolationKind::Empty));
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(Self {
            route,
            confidence,
            memory_flag,
            tool_flag,
            reason,
        })
    }

    /// Canonical single-line JSON with keys in [`RECORD_KEYS`] order.
    pub fn to_json(&self) -> String {
        // Serializing a struct of plain fields cannot fail.
        serde_json::to_string(self).expect("control record serializes")
    }
}

fn truncate_reason(reason: String) -> String {
    match reason.char_indices().nth(REASON_MAX_CHARS) {
        Some((cut, _)) => reason[..cut].to_string(),
        None => reason,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NotAnObject,
    Absent,
    WrongType { expected: &'static str },
    NotInEnumeration,
    OutOfRange,
    Empty,
    UnexpectedKey,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotAnObject => f.write_str("not an object"),
            Self::Absent => f.write_str("absent"),
            Self::WrongType { expected } => write!(f, "expected {expected}"),
            Self::NotInEnumeration => f.write_str("not in {chat,task,dev,doc}"),
            Self::OutOfRange => f.write_str("not in [0,1]"),
            Self::Empty => f.write_str("empty after trimming"),
            Self::UnexpectedKey => f.write_str("unexpected key"),
        }
    }
}

/// One schema violation, tagged with a field path such as `.route`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl Violation {
    fn new(path: impl Into<String>, kind: ViolationKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

/// Checks a parsed JSON value against the control record schema and returns
/// every violation found. An empty list means the value is valid.
pub fn validate_schema(candidate: &Value) -> Vec<Violation> {
    let Some(obj) = candidate.as_object() else {
        return alloc::vec![Violation::new(".", ViolationKind::NotAnObject)];
    };
    let mut out = Vec::new();

    match obj.get("route") {
        None => out.push(Violation::new(".route", ViolationKind::Absent)),
        Some(Value::String(s)) => {
            if s.parse::<RouteLabel>().is_err() {
                out.push(Violation::new(".route", ViolationKind::NotInEnumeration));
            }
        }
        Some(_) => out.push(Violation::new(
            ".route",
            ViolationKind::WrongType { expected: "string" },
        )),
    }

    match obj.get("confidence") {
        None => out.push(Violation::new(".confidence", ViolationKind::Absent)),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(c) if (0.0..=1.0).contains(&c) => {}
            _ => out.push(Violation::new(".confidence", ViolationKind::OutOfRange)),
        },
        Some(_) => out.push(Violation::new(
            ".confidence",
            ViolationKind::WrongType { expected: "number" },
        )),
    }

    for key in ["memory", "tool"] {
        match obj.get(key) {
            None => out.push(Violation::new(format!(".{key}"), ViolationKind::Absent)),
            Some(Value::Bool(_)) => {}
            Some(_) => out.push(Violation::new(
                format!(".{key}"),
                ViolationKind::WrongType { expected: "boolean" },
            )),
        }
    }

    match obj.get("reason") {
        None => out.push(Violation::new(".reason", ViolationKind::Absent)),
        Some(Value::String(s)) => {
            if s.trim().is_empty() {
                out.push(Violation::new(".reason", ViolationKind::Empty));
            }
        }
        Some(_) => out.push(Violation::new(
            ".reason",
            ViolationKind::WrongType { expected: "string" },
        )),
    }

    for key in obj.keys() {
        if !RECORD_KEYS.contains(&key.as_str()) {
            out.push(Violation::new(format!(".{key}"), ViolationKind::UnexpectedKey));
        }
    }
    out
}

/// A rejected model output: the taxonomy class plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub class: FailureClass,
    pub violations: Vec<Violation>,
}

impl ParseFailure {
    pub fn parse_error() -> Self {
        Self {
            class: FailureClass::JsonParseError,
            violations: Vec::new(),
        }
    }

    pub fn schema(violations: Vec<Violation>) -> Self {
        Self {
            class: FailureClass::SchemaInvalid,
            violations,
        }
    }
}

/// Returns the first JSON object embedded in `raw`, together with its byte
/// span. Text before and after the object is ignored.
pub fn extract_first_object(raw: &str) -> Option<(Map<String, Value>, core::ops::Range<usize>)> {
    for (start, _) in raw.match_indices('{') {
        let tail = &raw[start..];
        let mut stream = serde_json::Deserializer::from_str(tail).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            let end = start + stream.byte_offset();
            return Some((map, start..end));
        }
    }
    None
}

/// Parses a complete model output into a control record.
///
/// The whole output is tried as JSON first. Failing that, the first embedded
/// JSON object is used. Syntax failure yields `json_parse_error`; a JSON value
/// that breaks the schema yields `schema_invalid`.
pub fn parse_control_record(raw: &str) -> Result<ControlRecord, ParseFailure> {
    let value = match serde_json::from_str::<Value>(raw.trim()) {
        Ok(v) => v,
        Err(_) => match extract_first_object(raw) {
            Some((map, _)) => Value::Object(map),
            None => return Err(ParseFailure::parse_error()),
        },
    };
    record_from_value(&value).map_err(ParseFailure::schema)
}

/// Converts an already-parsed JSON value into a record.
pub fn record_from_value(value: &Value) -> Result<ControlRecord, Vec<Violation>> {
    let violations = validate_schema(value);
    if !violations.is_empty() {
        return Err(violations);
    }
    // The validator has checked presence and types of every field.
    let obj = value.as_object().expect("validated object");
    let route = obj["route"].as_str().and_then(|s| s.parse().ok());
    let confidence = obj["confidence"].as_f64();
    let memory = obj["memory"].as_bool();
    let tool = obj["tool"].as_bool();
    let reason = obj["reason"].as_str();
    match (route, confidence, memory, tool, reason) {
        (Some(route), Some(c), Some(m), Some(t), Some(r)) => ControlRecord::new(route, c, m, t, r.to_string()),
        _ => unreachable!("validated fields have the checked types"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn parses_direct_record() {
        let rec = parse_control_record(
            r#"{"route":"chat","confidence":0.9,"memory":false,"tool":false,"reason":"greeting"}"#,
        )
        .unwrap();
        assert_eq!(
            rec,
            ControlRecord::new(RouteLabel::Chat, 0.9, false, false, "greeting").unwrap()
        );
    }

    #[test]
    fn confidence_above_one_is_schema_invalid() {
        let err = parse_control_record(r#"{"route":"chat","confidence":1.7,"memory":false,"tool":false,"reason":"x"}"#)
            .unwrap_err();
        assert_eq!(err.class, FailureClass::SchemaInvalid);
        assert_eq!(err.violations[0].path, ".confidence");
    }

    #[test]
    fn percent_confidence_is_not_rescaled() {
        let err = parse_control_record(r#"{"route":"chat","confidence":85,"memory":false,"tool":false,"reason":"x"}"#)
            .unwrap_err();
        assert_eq!(err.class, FailureClass::SchemaInvalid);
    }

    #[test]
    fn extracts_record_from_prose() {
        let body = r#"{"route":"dev","confidence":0.8,"memory":true,"tool":true,"reason":"stack trace"}"#;
        let raw = alloc::format!("Sure! Here is the JSON: {body} Let me know.");
        let rec = parse_control_record(&raw).unwrap();
        assert_eq!(rec.route, RouteLabel::Dev);

        // Reference: a plain JSON parse of the located substring.
        let start = raw.find('{').unwrap();
        let end = raw.rfind('}').unwrap() + 1;
        let reference: Value = serde_json::from_str(&raw[start..end]).unwrap();
        let (map, span) = extract_first_object(&raw).unwrap();
        assert_eq!(Value::Object(map), reference);
        assert_eq!(span, start..end);
    }

    #[test]
    fn skips_brace_prose_before_object() {
        let raw = r#"use {curly} braces: {"route":"doc","confidence":0.5,"memory":false,"tool":false,"reason":"r"}"#;
        assert_eq!(parse_control_record(raw).unwrap().route, RouteLabel::Doc);
    }

    #[test]
    fn no_object_is_parse_error() {
        for raw in ["", "route: chat", "{\"route\":\"chat\",", "I think the route is dev."] {
            assert_eq!(
                parse_control_record(raw).unwrap_err().class,
                FailureClass::JsonParseError,
                "{raw}"
            );
        }
    }

    #[test]
    fn valid_json_non_object_is_schema_invalid() {
        let err = parse_control_record("[1, 2]").unwrap_err();
        assert_eq!(err.class, FailureClass::SchemaInvalid);
    }

    #[test]
    fn validator_reports_missing_tool() {
        let v = json!({"route":"chat","confidence":0.5,"memory":false,"reason":"x"});
        let out = validate_schema(&v);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].path, ".tool");
        assert_eq!(out[0].kind, ViolationKind::Absent);
    }

    #[test]
    fn validator_reports_route_typo() {
        let v = json!({"route":"docs","confidence":0.5,"memory":false,"tool":true,"reason":"x"});
        let out = validate_schema(&v);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].path, ".route");
        assert_eq!(out[0].to_string(), ".route: not in {chat,task,dev,doc}");
    }

    #[test]
    fn validator_reports_every_violation() {
        let v = json!({"route":7,"confidence":"high","memory":"no","extra":1});
        let paths: Vec<_> = validate_schema(&v).into_iter().map(|v| v.path).collect();
        assert_eq!(
            paths,
            [".route", ".confidence", ".memory", ".tool", ".reason", ".extra"]
        );
    }

    #[test]
    fn validator_accepts_complete_object() {
        let v = json!({"route":"task","confidence":0,"memory":true,"tool":false,"reason":"r"});
        assert!(validate_schema(&v).is_empty());
    }

    #[test]
    fn blank_reason_is_rejected_and_long_reason_truncated() {
        assert!(ControlRecord::new(RouteLabel::Chat, 0.1, false, false, "  \t").is_err());
        let long = "é".repeat(600);
        let rec = ControlRecord::new(RouteLabel::Chat, 0.1, false, false, long).unwrap();
        assert_eq!(rec.reason.chars().count(), REASON_MAX_CHARS);
    }

    #[test]
    fn canonical_json_key_order() {
        let rec = ControlRecord::new(RouteLabel::Doc, 0.7, true, false, "manual").unwrap();
        assert_eq!(
            rec.to_json(),
            r#"{"route":"doc","confidence":0.7,"memory":true,"tool":false,"reason":"manual"}"#
        );
    }

    fn arb_record() -> impl Strategy<Value = ControlRecord> {
        (
            0usize..4,
            0.0f64..=1.0,
            any::<bool>(),
            any::<bool>(),
            "[a-zA-Z0-9 ,.;:{}\"\\\\é]{0,40}[a-z]",
        )
            .prop_map(|(r, c, m, t, reason)| ControlRecord::new(RouteLabel::ALL[r], c, m, t, reason).unwrap())
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(rec in arb_record()) {
            prop_assert_eq!(parse_control_record(&rec.to_json()).unwrap(), rec);
        }

        #[test]
        fn every_input_gets_exactly_one_class(raw in ".{0,120}") {
            let class = match parse_control_record(&raw) {
                Ok(_) => FailureClass::Ok,
                Err(f) => f.class,
            };
            prop_assert!(matches!(
                class,
                FailureClass::Ok | FailureClass::JsonParseError | FailureClass::SchemaInvalid
            ));
        }
    }
}
