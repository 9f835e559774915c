//! Compact line codec and deterministic local reconstruction.
//!
//! A compact code is one line of `;`-separated `key=value` fields:
//!
//! ```text
//! R=<route>;C=<int 0..100>;M=<0|1>;T=<0|1>;X=<free text>
//! ```
//!
//! Keys are case-insensitive and whitespace around `;` and `=` is ignored.
//! `X` runs to the end of the line, so the reason may itself contain `;`.
//! The first line of the output that fits the grammar is used.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;
use crate::record::{ControlRecord, FailureClass, ParseFailure, RouteLabel, Violation, ViolationKind};

/// The grammar line, verbatim. The MCLR prompt template embeds this string.
pub const COMPACT_GRAMMAR: &str = "R=<route>;C=<int 0..100>;M=<0|1>;T=<0|1>;X=<free text>";

pub const DEFAULT_CONFIDENCE: f64 = 0.5;
pub const DEFAULT_REASON: &str = "(compact)";

/// Raw tokens of a parsed compact line. Nothing is validated yet.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompactCode {
    pub route_token: Option<String>,
    pub confidence_token: Option<String>,
    pub memory_token: Option<String>,
    pub tool_token: Option<String>,
    pub reason_token: Option<String>,
}

impl CompactCode {
    pub fn new(route: &str, confidence: &str, memory: &str, tool: &str, reason: &str) -> Self {
        Self {
            route_token: Some(route.to_string()),
            confidence_token: Some(confidence.to_string()),
            memory_token: Some(memory.to_string()),
            tool_token: Some(tool.to_string()),
            reason_token: Some(reason.to_string()),
        }
    }
}

fn parse_line(line: &str) -> Option<CompactCode> {
    let mut code = CompactCode::default();
    let mut seen = 0usize;
    let mut rest = line;
    loop {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ';');
        if rest.is_empty() {
            break;
        }
        let eq = rest.find('=')?;
        let key = rest[..eq].trim();
        let after = &rest[eq + 1..];
        let slot = match key {
            k if k.eq_ignore_ascii_case("R") => &mut code.route_token,
            k if k.eq_ignore_ascii_case("C") => &mut code.confidence_token,
            k if k.eq_ignore_ascii_case("M") => &mut code.memory_token,
            k if k.eq_ignore_ascii_case("T") => &mut code.tool_token,
            k if k.eq_ignore_ascii_case("X") => &mut code.reason_token,
            _ => return None,
        };
        if slot.is_some() {
            return None;
        }
        let is_reason = key.eq_ignore_ascii_case("X");
        let (value, next) = if is_reason {
            (after, "")
        } else {
            match after.find(';') {
                Some(i) => (&after[..i], &after[i + 1..]),
                None => (after, ""),
            }
        };
        *slot = Some(value.trim().to_string());
        seen += 1;
        rest = next;
    }
    (seen > 0).then_some(code)
}

/// Finds the first grammar line in `raw`.
///
/// No grammar line at all is `json_parse_error`; a grammar line without `R`
/// is `schema_invalid`.
pub fn parse_compact(raw: &str) -> Result<CompactCode, ParseFailure> {
    let code = raw.lines().find_map(parse_line).ok_or_else(ParseFailure::parse_error)?;
    match code.route_token.as_deref() {
        Some(r) if !r.is_empty() => Ok(code),
        _ => Err(ParseFailure::schema(alloc::vec![Violation {
            path: ".route".to_string(),
            kind: ViolationKind::Absent,
        }])),
    }
}

fn parse_flag(token: Option<&str>) -> bool {
    matches!(token.map(str::trim), Some(t) if t == "1" || t.eq_ignore_ascii_case("true"))
}

fn parse_confidence(token: Option<&str>) -> f64 {
    let Some(t) = token else {
        return DEFAULT_CONFIDENCE;
    };
    match t.trim().parse::<i64>() {
        Ok(v) => (v.clamp(0, 100) as f64) / 100.0,
        Err(_) => DEFAULT_CONFIDENCE,
    }
}

/// Deterministically realizes a control record from a compact code.
///
/// Missing or unreadable confidence defaults to 0.5, missing flags to
/// `false` and a missing reason to `(compact)`. Only an unknown route fails.
pub fn reconstruct(code: &CompactCode) -> Result<ControlRecord, ParseFailure> {
    let route = code
        .route_token
        .as_deref()
        .and_then(RouteLabel::parse_loose)
        .ok_or_else(|| {
            ParseFailure::schema(alloc::vec![Violation {
                path: ".route".to_string(),
                kind: ViolationKind::NotInEnumeration,
            }])
        })?;
    let confidence = parse_confidence(code.confidence_token.as_deref());
    let memory = parse_flag(code.memory_token.as_deref());
    let tool = parse_flag(code.tool_token.as_deref());
    let reason = match code.reason_token.as_deref().map(str::trim) {
        Some(r) if !r.is_empty() => r.to_string(),
        _ => DEFAULT_REASON.to_string(),
    };
    ControlRecord::new(route, confidence, memory, tool, reason).map_err(|v| ParseFailure {
        class: FailureClass::SchemaInvalid,
        violations: v,
    })
}

/// Encodes a record as a canonical compact line. Confidence is rounded to
/// the nearest percent; line breaks in the reason become spaces.
pub fn emit_compact(record: &ControlRecord) -> String {
    let c = math::round(record.confidence * 100.0) as i64;
    let reason: String = record
        .reason
        .chars()
        .map(|ch| if ch == '\n' || ch == '\r' { ' ' } else { ch })
        .collect();
    format!(
        "R={};C={};M={};T={};X={}",
        record.route,
        c,
        u8::from(record.memory_flag),
        u8::from(record.tool_flag),
        reason
    )
}

/// Every code on the enumerable grid: 4 routes x 101 confidences x 2 x 2.
pub fn enumerate_grid() -> Vec<CompactCode> {
    let mut out = Vec::with_capacity(4 * 101 * 4);
    for route in RouteLabel::ALL {
        for c in 0..=100 {
            for m in 0..2 {
                for t in 0..2 {
                    out.push(CompactCode::new(
                        route.as_str(),
                        &format!("{c}"),
                        &format!("{m}"),
                        &format!("{t}"),
                        "grid",
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::validate_schema;
    use proptest::prelude::*;

    #[test]
    fn canonical_line() {
        let code = parse_compact("R=dev;C=85;M=0;T=1;X=debug request").unwrap();
        assert_eq!(code, CompactCode::new("dev", "85", "0", "1", "debug request"));
        let rec = reconstruct(&code).unwrap();
        assert_eq!(
            rec,
            ControlRecord::new(RouteLabel::Dev, 0.85, false, true, "debug request").unwrap()
        );
    }

    #[test]
    fn case_and_whitespace_tolerance() {
        let code = parse_compact("r = chat ; c=50 ; m=1 ; t=0 ; x=hello").unwrap();
        assert_eq!(code, CompactCode::new("chat", "50", "1", "0", "hello"));
    }

    #[test]
    fn prose_only_is_parse_error() {
        let err = parse_compact("I think the route is dev.").unwrap_err();
        assert_eq!(err.class, FailureClass::JsonParseError);
    }

    #[test]
    fn json_is_not_a_compact_line() {
        let err =
            parse_compact(r#"{"route":"dev","confidence":0.5,"memory":false,"tool":false,"reason":"x"}"#).unwrap_err();
        assert_eq!(err.class, FailureClass::JsonParseError);
    }

    #[test]
    fn missing_route_is_schema_invalid() {
        let err = parse_compact("C=50;M=1;T=0;X=hello").unwrap_err();
        assert_eq!(err.class, FailureClass::SchemaInvalid);
    }

    #[test]
    fn reason_keeps_semicolons() {
        let code = parse_compact("R=doc;X=see a; b; c").unwrap();
        assert_eq!(code.reason_token.as_deref(), Some("see a; b; c"));
    }

    #[test]
    fn first_grammar_line_wins() {
        let raw = "Here you go:\nR=task;C=10;M=1;T=1;X=first\nR=chat;C=90;M=0;T=0;X=second";
        assert_eq!(parse_compact(raw).unwrap().route_token.as_deref(), Some("task"));
    }

    #[test]
    fn all_defaults() {
        let code = CompactCode {
            route_token: Some("chat".into()),
            ..Default::default()
        };
        assert_eq!(
            reconstruct(&code).unwrap(),
            ControlRecord::new(RouteLabel::Chat, 0.5, false, false, "(compact)").unwrap()
        );
    }

    #[test]
    fn unknown_route_fails_reconstruction() {
        let err = reconstruct(&CompactCode::new("docs", "90", "0", "0", "x")).unwrap_err();
        assert_eq!(err.class, FailureClass::SchemaInvalid);
    }

    #[test]
    fn confidence_is_clamped() {
        let hi = reconstruct(&CompactCode::new("chat", "250", "0", "0", "x")).unwrap();
        let lo = reconstruct(&CompactCode::new("chat", "-3", "0", "0", "x")).unwrap();
        assert_eq!((hi.confidence, lo.confidence), (1.0, 0.0));
    }

    #[test]
    fn reconstruction_is_byte_deterministic() {
        let code = CompactCode::new("Dev", "7", "1", "true", " trailing ");
        let a = reconstruct(&code).unwrap().to_json();
        let b = reconstruct(&code.clone()).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn full_grid_reconstructs_and_validates() {
        let grid = enumerate_grid();
        assert_eq!(grid.len(), 1616);
        for code in &grid {
            let rec = reconstruct(code).unwrap();
            let value = serde_json::to_value(&rec).unwrap();
            assert!(validate_schema(&value).is_empty());
        }
    }

    proptest! {
        #[test]
        fn emit_parse_reconstruct_round_trip(
            r in 0usize..4,
            c in 0u32..=100,
            m in any::<bool>(),
            t in any::<bool>(),
            reason in "[a-z][a-z ;=]{0,30}[a-z]",
        ) {
            let rec = ControlRecord::new(RouteLabel::ALL[r], c as f64 / 100.0, m, t, reason).unwrap();
            let back = reconstruct(&parse_compact(&emit_compact(&rec)).unwrap()).unwrap();
            prop_assert_eq!(back, rec);
        }
    }
}
