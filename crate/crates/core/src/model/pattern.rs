//! Pattern expression tree.

use serde::{Deserialize, Serialize};

use super::expr::{AttrRef, Expression};

/// One node of a pattern. The operator carries the structure; guard and
/// repetition decorate it. When both are present the guard applies first and
/// the repetition wraps the guarded node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternNode {
    pub op: PatternOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<PatternGuard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<RepetitionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternOp {
    Event(EventRef),
    And(Vec<PatternNode>),
    Or(Vec<PatternNode>),
    Not(Box<PatternNode>),
    FollowedBy(Vec<PatternNode>),
}

/// Leaf: an occurrence of the event bound to target `alias`, optionally
/// filtered, optionally tagged so the rest of the rule can refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRef {
    pub alias: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Expression>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    WithIn,
    WithInMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternGuard {
    pub kind: GuardKind,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_instances: Option<i64>,
}

impl PatternGuard {
    pub fn within(seconds: f64) -> Self {
        Self {
            kind: GuardKind::WithIn,
            seconds,
            max_instances: None,
        }
    }

    pub fn within_max(seconds: f64, max_instances: i64) -> Self {
        Self {
            kind: GuardKind::WithInMax,
            seconds,
            max_instances: Some(max_instances),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepetitionKind {
    Every,
    EveryDistinct,
    Range,
    While,
    Until,
}

/// Repetition modifier. Which parameters are meaningful depends on `kind`;
/// the others stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepetitionSpec {
    pub kind: RepetitionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distinct_keys: Vec<AttrRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<Box<PatternNode>>,
}

impl RepetitionSpec {
    fn bare(kind: RepetitionKind) -> Self {
        Self {
            kind,
            distinct_keys: Vec::new(),
            low: None,
            high: None,
            condition: None,
            until: None,
        }
    }

    pub fn every() -> Self {
        Self::bare(RepetitionKind::Every)
    }

    pub fn every_distinct(keys: Vec<AttrRef>) -> Self {
        Self {
            distinct_keys: keys,
            ..Self::bare(RepetitionKind::EveryDistinct)
        }
    }

    pub fn range(low: u32, high: u32) -> Self {
        Self {
            low: Some(low),
            high: Some(high),
            ..Self::bare(RepetitionKind::Range)
        }
    }

    pub fn while_cond(condition: Expression) -> Self {
        Self {
            condition: Some(condition),
            ..Self::bare(RepetitionKind::While)
        }
    }

    pub fn until(node: PatternNode) -> Self {
        Self {
            until: Some(Box::new(node)),
            ..Self::bare(RepetitionKind::Until)
        }
    }
}

impl PatternNode {
    fn from_op(op: PatternOp) -> Self {
        Self {
            op,
            guard: None,
            repetition: None,
        }
    }

    pub fn event(alias: impl Into<String>) -> Self {
        Self::from_op(PatternOp::Event(EventRef {
            alias: alias.into(),
            tag: None,
            filter: None,
        }))
    }

    pub fn tagged(alias: impl Into<String>, tag: impl Into<String>) -> Self {
        Self::from_op(PatternOp::Event(EventRef {
            alias: alias.into(),
            tag: Some(tag.into()),
            filter: None,
        }))
    }

    pub fn and(children: Vec<PatternNode>) -> Self {
        Self::from_op(PatternOp::And(children))
    }

    pub fn or(children: Vec<PatternNode>) -> Self {
        Self::from_op(PatternOp::Or(children))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: PatternNode) -> Self {
        Self::from_op(PatternOp::Not(Box::new(child)))
    }

    pub fn followed_by(children: Vec<PatternNode>) -> Self {
        Self::from_op(PatternOp::FollowedBy(children))
    }

    /// Sets the filter of an event leaf. No effect on other operators.
    pub fn with_filter(mut self, filter: Expression) -> Self {
        if let PatternOp::Event(e) = &mut self.op {
            e.filter = Some(filter);
        }
        self
    }

    pub fn with_guard(mut self, guard: PatternGuard) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_repetition(mut self, repetition: RepetitionSpec) -> Self {
        self.repetition = Some(repetition);
        self
    }

    pub fn every(self) -> Self {
        self.with_repetition(RepetitionSpec::every())
    }

    pub fn within(self, seconds: f64) -> Self {
        self.with_guard(PatternGuard::within(seconds))
    }

    /// Direct structural children, in order. The `until` operand of a
    /// repetition is not included.
    pub fn children(&self) -> Vec<&PatternNode> {
        match &self.op {
            PatternOp::Event(_) => Vec::new(),
            PatternOp::Not(c) => vec![c],
            PatternOp::And(cs) | PatternOp::Or(cs) | PatternOp::FollowedBy(cs) => cs.iter().collect(),
        }
    }

    /// Pre-order walk yielding every node with its document path, including
    /// nodes reachable through `until`.
    pub fn walk<'a>(&'a self, path: &str, visit: &mut impl FnMut(&'a PatternNode, &str)) {
        visit(self, path);
        match &self.op {
            PatternOp::Event(_) => {}
            PatternOp::Not(c) => c.walk(&format!("{path}.op.not"), visit),
            PatternOp::And(cs) => walk_list(cs, &format!("{path}.op.and"), visit),
            PatternOp::Or(cs) => walk_list(cs, &format!("{path}.op.or"), visit),
            PatternOp::FollowedBy(cs) => walk_list(cs, &format!("{path}.op.followed_by"), visit),
        }
        if let Some(until) = self.repetition.as_ref().and_then(|r| r.until.as_deref()) {
            until.walk(&format!("{path}.repetition.until"), visit);
        }
    }

    /// Event leaves in pre-order.
    pub fn leaves(&self) -> Vec<&EventRef> {
        let mut out = Vec::new();
        self.walk("pattern", &mut |node, _| {
            if let PatternOp::Event(e) = &node.op {
                out.push(e);
            }
        });
        out
    }

    pub(crate) fn map_expressions(&mut self, f: &mut impl FnMut(&mut Expression)) {
        match &mut self.op {
            PatternOp::Event(e) => {
                if let Some(filter) = &mut e.filter {
                    f(filter);
                }
            }
            PatternOp::Not(c) => c.map_expressions(f),
            PatternOp::And(cs) | PatternOp::Or(cs) | PatternOp::FollowedBy(cs) => {
                cs.iter_mut().for_each(|c| c.map_expressions(f))
            }
        }
        if let Some(rep) = &mut self.repetition {
            if let Some(cond) = &mut rep.condition {
                f(cond);
            }
            if let Some(until) = &mut rep.until {
                until.map_expressions(f);
            }
        }
    }
}

fn walk_list<'a>(nodes: &'a [PatternNode], base: &str, visit: &mut impl FnMut(&'a PatternNode, &str)) {
    for (i, n) in nodes.iter().enumerate() {
        n.walk(&format!("{base}[{i}]"), visit);
    }
}
