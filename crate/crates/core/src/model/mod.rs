//! In-memory rule model.
//!
//! A [`RuleModel`] holds one complete rule: the event types it reads, the
//! target bindings (event + window) it draws from, an optional pattern, and
//! the three remaining logical groups (bring, condition, group-by) plus an
//! optional derived output event.
//!
//! The model stores whatever it is given. Invariant violations are reported
//! by [`crate::validator`], never repaired here.

mod expr;
mod pattern;

pub use expr::*;
pub use pattern::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("alias {alias:?} at {path} collides with another target after defaulting")]
    AliasCollision { alias: String, path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown alias {0:?}")]
    UnknownAlias(String),
    #[error("{alias:?} has no attribute {attr:?}")]
    UnknownAttribute { alias: String, attr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleModel {
    pub name: String,
    #[serde(default)]
    pub events: Vec<EventType>,
    #[serde(default)]
    pub targets: Vec<TargetBinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternNode>,
    #[serde(default)]
    pub bring: Vec<SelectItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<GroupBySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventType {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
}

impl EventType {
    pub fn new(name: impl Into<String>, attributes: Vec<Attribute>) -> Self {
        Self {
            name: name.into(),
            attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    pub kind: AttrKind,
}

impl Attribute {
    pub fn new(name: impl Into<String>, kind: AttrKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Integer,
    Float,
    String,
    Boolean,
    /// Milliseconds since the epoch, carried as an integer.
    Timestamp,
}

impl AttrKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, AttrKind::Integer | AttrKind::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBinding {
    #[serde(rename = "event")]
    pub event_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// Attributes partitioning the window into per-key instances.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_win: Vec<String>,
}

impl TargetBinding {
    pub fn new(event_name: impl Into<String>) -> Self {
        Self {
            event_name: event_name.into(),
            alias: None,
            window: None,
            group_win: Vec::new(),
        }
    }

    pub fn alias(mut self, alias: impl Into<String>) -> Self {
        self.alias = Some(alias.into());
        self
    }

    pub fn window(mut self, window: Window) -> Self {
        self.window = Some(window);
        self
    }

    pub fn group_win(mut self, keys: Vec<String>) -> Self {
        self.group_win = keys;
        self
    }

    /// The alias in effect: the explicit one, else the lowercased event name.
    pub fn effective_alias(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.event_name.to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Timer,
    Counter,
    KeepAll,
}

/// Retention policy of a target. `seconds` belongs to timers, `count` to
/// counters; keep-all takes no parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub kind: WindowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<i64>,
}

impl Window {
    pub fn timer(seconds: f64) -> Self {
        Self {
            kind: WindowKind::Timer,
            seconds: Some(seconds),
            count: None,
        }
    }

    pub fn counter(count: i64) -> Self {
        Self {
            kind: WindowKind::Counter,
            seconds: None,
            count: Some(count),
        }
    }

    pub fn keep_all() -> Self {
        Self {
            kind: WindowKind::KeepAll,
            seconds: None,
            count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectItem {
    /// `select *`
    Star,
    Column {
        expr: Operand,
        #[serde(rename = "as", default, skip_serializing_if = "Option::is_none")]
        alias: Option<String>,
    },
}

impl SelectItem {
    pub fn column(expr: Operand) -> Self {
        SelectItem::Column { expr, alias: None }
    }

    pub fn aliased(expr: Operand, alias: impl Into<String>) -> Self {
        SelectItem::Column {
            expr,
            alias: Some(alias.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBySpec {
    pub keys: Vec<AttrRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub name: String,
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Empty rule named `name`, all four groups empty.
pub fn new_model(name: &str) -> Result<RuleModel, ModelError> {
    if !is_identifier(name) {
        return Err(ModelError::InvalidIdentifier(name.to_string()));
    }
    Ok(RuleModel {
        name: name.to_string(),
        events: Vec::new(),
        targets: Vec::new(),
        pattern: None,
        bring: Vec::new(),
        condition: None,
        group_by: None,
        output: None,
    })
}

impl RuleModel {
    pub fn new(name: &str) -> Result<Self, ModelError> {
        new_model(name)
    }

    pub fn with_event(mut self, event: EventType) -> Self {
        self.events.push(event);
        self
    }

    pub fn with_target(mut self, target: TargetBinding) -> Self {
        self.targets.push(target);
        self
    }

    pub fn with_pattern(mut self, pattern: PatternNode) -> Self {
        self.pattern = Some(pattern);
        self
    }

    pub fn select(mut self, item: SelectItem) -> Self {
        self.bring.push(item);
        self
    }

    pub fn when(mut self, condition: Expression) -> Self {
        self.condition = Some(condition);
        self
    }

    pub fn group_by(mut self, keys: Vec<AttrRef>) -> Self {
        self.group_by = Some(GroupBySpec { keys });
        self
    }

    pub fn output(mut self, name: impl Into<String>) -> Self {
        self.output = Some(OutputSpec { name: name.into() });
        self
    }

    pub fn event(&self, name: &str) -> Option<&EventType> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn target(&self, alias: &str) -> Option<(usize, &TargetBinding)> {
        self.targets
            .iter()
            .enumerate()
            .find(|(_, t)| t.effective_alias() == alias)
    }

    /// Event type bound to a target alias or, failing that, to a pattern tag.
    pub fn scope_event(&self, alias: &str) -> Option<&EventType> {
        if let Some((_, t)) = self.target(alias) {
            return self.event(&t.event_name);
        }
        let pattern = self.pattern.as_ref()?;
        let leaf = pattern.leaves().into_iter().find(|l| l.tag.as_deref() == Some(alias))?;
        let (_, t) = self.target(&leaf.alias)?;
        self.event(&t.event_name)
    }
}

/// Looks up the attribute bound at `alias.attr`, where `alias` is a target
/// alias or a pattern tag.
pub fn resolve<'m>(model: &'m RuleModel, alias: &str, attr: &str) -> Result<&'m Attribute, ResolveError> {
    let event = model
        .scope_event(alias)
        .ok_or_else(|| ResolveError::UnknownAlias(alias.to_string()))?;
    event.attribute(attr).ok_or_else(|| ResolveError::UnknownAttribute {
        alias: alias.to_string(),
        attr: attr.to_string(),
    })
}

/// Normal form: absent aliases become the lowercased event name, and float
/// literals with an integral value become integer literals. Target order is
/// preserved. Idempotent.
pub fn canonicalize(model: &RuleModel) -> Result<RuleModel, ModelError> {
    let mut out = model.clone();
    for i in 0..out.targets.len() {
        if out.targets[i].alias.is_some() {
            continue;
        }
        let alias = out.targets[i].event_name.to_lowercase();
        let clash = model
            .targets
            .iter()
            .enumerate()
            .any(|(j, t)| j != i && t.effective_alias() == alias);
        if clash {
            return Err(ModelError::AliasCollision {
                alias,
                path: format!("targets[{i}]"),
            });
        }
        out.targets[i].alias = Some(alias);
    }

    let normalize = |lit: &mut Literal| {
        if let Literal::Float(v) = *lit {
            if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 {
                *lit = Literal::Int(v as i64);
            }
        }
    };
    let mut on_expr = |e: &mut Expression| e.map_literals(&normalize);
    if let Some(c) = &mut out.condition {
        on_expr(c);
    }
    if let Some(p) = &mut out.pattern {
        p.map_expressions(&mut on_expr);
    }
    for item in &mut out.bring {
        if let SelectItem::Column { expr, .. } = item {
            expr.map_literals(&normalize);
        }
    }
    Ok(out)
}
