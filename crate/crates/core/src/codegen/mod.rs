//! Model-to-text generation.
//!
//! [`generate_epl`] covers the whole model. [`generate_drl`] covers the
//! single-stream subset that maps onto one Drools Fusion rule and reports
//! anything outside it as [`CodegenError::Unsupported`].

mod drl;
mod epl;

pub use drl::generate_drl;
pub use epl::{generate_epl, generate_pattern_fragment};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AttrRef, Operand, PatternNode, PatternOp, RuleModel, SelectItem};
use crate::validator::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Epl,
    Drl,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Epl => "epl",
            Target::Drl => "drl",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epl" => Ok(Target::Epl),
            "drl" => Ok(Target::Drl),
            other => Err(format!("unknown target {other:?} (expected epl or drl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSource {
    pub target: Target,
    pub text: String,
    pub canonical_text: String,
}

impl GeneratedSource {
    fn new(target: Target, text: String) -> Self {
        let canonical_text = normalize(&text);
        Self {
            target,
            text,
            canonical_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodegenError {
    #[error("model has {} validation finding(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("unsupported construct at {path}: {message}")]
    Unsupported { path: String, message: String },
}

/// Collapses whitespace runs to one space, trims each line and drops blank
/// lines.
pub fn normalize(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

const KEYWORDS: &[&str] = &[
    "select",
    "from",
    "where",
    "as",
    "and",
    "or",
    "not",
    "group",
    "by",
    "insert",
    "into",
    "pattern",
    "every",
    "distinct",
    "while",
    "until",
    "timer",
    "within",
    "withinmax",
    "win",
    "std",
    "time",
    "length",
    "keepall",
    "groupwin",
    "sec",
    "avg",
    "sum",
    "max",
    "min",
    "count",
    "desc",
    "true",
    "false",
];

/// Splits EPL text into tokens, ignoring layout. Keywords and built-in
/// function names are lowercased; identifiers and literals are kept
/// verbatim.
pub fn tokenize_epl(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let lower = word.to_ascii_lowercase();
            out.push(if KEYWORDS.contains(&lower.as_str()) {
                lower
            } else {
                word
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if c == '\'' || c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            out.push(chars[start..i].iter().collect());
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if matches!(two.as_str(), ">=" | "<=" | "!=" | "<>" | "->") {
                out.push(two);
                i += 2;
            } else {
                out.push(c.to_string());
                i += 1;
            }
        }
    }
    out
}

/// Where a projected column takes its value from.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSource<'m> {
    /// One attribute of a star expansion.
    Attr(AttrRef),
    Expr(&'m Operand),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputColumn<'m> {
    pub name: String,
    pub source: ColumnSource<'m>,
    /// Index of the bring item this column comes from.
    pub item: usize,
}

/// Output columns of the bring group in order, with `*` expanded. Columns
/// without an explicit alias are named after their EPL rendering.
pub fn output_columns(model: &RuleModel) -> Vec<OutputColumn<'_>> {
    let style = epl::RefStyle::for_rule(model);
    let mut cols = Vec::new();
    for (item, sel) in model.bring.iter().enumerate() {
        match sel {
            SelectItem::Star => {
                for (scope, attr) in star_attrs(model) {
                    let name = if style.qualify {
                        format!("{scope}.{attr}")
                    } else {
                        attr.clone()
                    };
                    cols.push(OutputColumn {
                        name,
                        source: ColumnSource::Attr(AttrRef::new(scope, attr)),
                        item,
                    });
                }
            }
            SelectItem::Column { expr, alias } => cols.push(OutputColumn {
                name: alias.clone().unwrap_or_else(|| epl::render_operand(expr, &style)),
                source: ColumnSource::Expr(expr),
                item,
            }),
        }
    }
    cols
}

/// (alias-or-tag, attribute) pairs that `*` stands for.
fn star_attrs(model: &RuleModel) -> Vec<(String, String)> {
    let mut out = Vec::new();
    match &model.pattern {
        None => {
            for t in &model.targets {
                if let Some(ev) = model.event(&t.event_name) {
                    let alias = t.effective_alias();
                    out.extend(ev.attributes.iter().map(|a| (alias.clone(), a.name.clone())));
                }
            }
        }
        Some(p) => {
            for leaf in bound_leaves(p) {
                let (Some(tag), Some(ev)) = (&leaf.tag, model.scope_event(&leaf.alias)) else {
                    continue;
                };
                out.extend(ev.attributes.iter().map(|a| (tag.clone(), a.name.clone())));
            }
        }
    }
    out
}

/// Event leaves that can bind an event in a match (not under `not`), in
/// pre-order.
pub(crate) fn bound_leaves(node: &PatternNode) -> Vec<&crate::model::EventRef> {
    fn go<'a>(n: &'a PatternNode, out: &mut Vec<&'a crate::model::EventRef>) {
        match &n.op {
            PatternOp::Event(e) => out.push(e),
            PatternOp::Not(_) => {}
            PatternOp::And(cs) | PatternOp::Or(cs) | PatternOp::FollowedBy(cs) => cs.iter().for_each(|c| go(c, out)),
        }
        if let Some(u) = n.repetition.as_ref().and_then(|r| r.until.as_deref()) {
            go(u, out);
        }
    }
    let mut out = Vec::new();
    go(node, &mut out);
    out
}

/// `10.0` prints as `10`, `2.5` as `2.5`.
pub(crate) fn fmt_number(v: f64) -> String {
    format!("{v}")
}
