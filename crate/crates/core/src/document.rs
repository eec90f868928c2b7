//! Model files (`.ceprule.json`) and newline-delimited event streams.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{OutputRow, TimedEvent};
use crate::model::RuleModel;

pub const FORMAT_VERSION: &str = "1.0";

/// A saved rule. `editor_meta` belongs to the visual editor and is carried
/// through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: String,
    pub rule: RuleModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub editor_meta: Option<serde_json::Value>,
}

impl ModelDocument {
    pub fn new(rule: RuleModel) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            rule,
            editor_meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{path} ({line}:{column}): {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Location inside the rule, e.g. `targets[0].window.kind`; document
    /// level keys keep their own name.
    pub path: String,
    pub message: String,
}

/// Drops serde_json's trailing " at line L column C".
fn bare_message(e: &serde_json::Error) -> String {
    let full = e.to_string();
    match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    }
}

fn rule_path(path: &str) -> String {
    match path {
        "." => String::new(),
        "rule" => String::new(),
        p => p.strip_prefix("rule.").unwrap_or(p).to_string(),
    }
}

fn position_of(text: &str, needle: &str) -> (usize, usize) {
    let Some(offset) = text.find(needle) else {
        return (1, 1);
    };
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses one JSON value, reporting the failing location as a path.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut *de).map_err(|e| {
        let path = rule_path(&e.path().to_string());
        let inner = e.into_inner();
        ParseError {
            line: inner.line(),
            column: inner.column(),
            path,
            message: bare_message(&inner),
        }
    })?;
    de.end().map_err(|e| ParseError {
        line: e.line(),
        column: e.column(),
        path: String::new(),
        message: bare_message(&e),
    })?;
    Ok(value)
}

pub fn parse_document(text: &str) -> Result<ModelDocument, Vec<ParseError>> {
    let doc: ModelDocument = parse_json(text).map_err(|e| vec![e])?;
    if doc.format_version != FORMAT_VERSION {
        let (line, column) = position_of(text, "\"format_version\"");
        return Err(vec![ParseError {
            line,
            column,
            path: "format_version".into(),
            message: format!(
                "unsupported format_version {:?}, expected {FORMAT_VERSION:?}",
                doc.format_version
            ),
        }]);
    }
    Ok(doc)
}

/// Structural parse only; run the validator separately.
pub fn parse_model(text: &str) -> Result<(RuleModel, Option<serde_json::Value>), Vec<ParseError>> {
    parse_document(text).map(|d| (d.rule, d.editor_meta))
}

/// Two-space indented JSON with fields in declaration order and a trailing
/// newline.
pub fn serialize_document(doc: &ModelDocument) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents always serialize");
    text.push('\n');
    text
}

pub fn serialize_model(model: &RuleModel, editor_meta: Option<&serde_json::Value>) -> String {
    serialize_document(&ModelDocument {
        format_version: FORMAT_VERSION.to_string(),
        rule: model.clone(),
        editor_meta: editor_meta.cloned(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: timestamp {timestamp} is earlier than {last}")]
    OutOfOrder { line: usize, timestamp: i64, last: i64 },
}

/// One event per non-blank line, timestamps non-decreasing.
pub fn parse_stream(text: &str) -> Result<Vec<TimedEvent>, StreamError> {
    let mut events: Vec<TimedEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let ev: TimedEvent = serde_json::from_str(raw).map_err(|e| StreamError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(last) = events.last() {
            if ev.timestamp < last.timestamp {
                return Err(StreamError::OutOfOrder {
                    line: i + 1,
                    timestamp: ev.timestamp,
                    last: last.timestamp,
                });
            }
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn write_stream(events: &[TimedEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events always serialize") + "\n")
        .collect()
}

pub fn write_rows(rows: &[OutputRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows always serialize") + "\n")
        .collect()
}

pub fn parse_rows(text: &str) -> Result<Vec<OutputRow>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_window_kind_reports_its_path() {
        let text = r#"{
  "format_version": "1.0",
  "rule": {
    "name": "W",
    "events": [{"name": "E", "attributes": []}],
    "targets": [{"event": "E", "window": {"kind": "tmie", "seconds": 10}}],
    "bring": ["star"]
  }
}"#;
        let errs = parse_model(text).unwrap_err();
        assert_eq!(errs[0].path, "targets[0].window.kind");
        assert_eq!(errs[0].line, 6);
    }

    #[test]
    fn wrong_version_and_unknown_keys_are_rejected() {
        let v2 = r#"{"format_version": "2.0", "rule": {"name": "X"}}"#;
        assert_eq!(parse_model(v2).unwrap_err()[0].path, "format_version");
        let extra = r#"{"format_version": "1.0", "rule": {"name": "X"}, "extra": 1}"#;
        assert!(parse_model(extra).is_err());
    }

    #[test]
    fn stream_lines() {
        let text = "{\"type\":\"T\",\"ts\":0,\"attrs\":{\"p\":1}}\n\n{\"type\":\"T\",\"ts\":5,\"attrs\":{}}\n";
        let evs = parse_stream(text).unwrap();
        assert_eq!(evs.len(), 2);
        assert_eq!(write_stream(&evs).lines().count(), 2);
        let back = "{\"type\":\"T\",\"ts\":5}\n{\"type\":\"T\",\"ts\":4}";
        assert!(matches!(
            parse_stream(back),
            Err(StreamError::OutOfOrder { line: 2, .. })
        ));
        assert!(matches!(
            parse_stream("{\"ts\":1}"),
            Err(StreamError::Malformed { line: 1, .. })
        ));
    }
}
