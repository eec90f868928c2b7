//! Coded diagnostics over a [`RuleModel`].
//!
//! | code | rule |
//! |------|------|
//! | V001 | the rule binds at least one target |
//! | V002 | names are identifiers and unique: rule, events, attributes, aliases, tags, select aliases, output (which must not shadow an event) |
//! | V003 | targets name declared events; pattern leaves name declared targets |
//! | V004 | attribute references and `groupwin` keys resolve |
//! | V005 | `avg`/`sum`/`min`/`max` take a numeric attribute; `*` only for `count` |
//! | V006 | window parameters match the kind and are positive |
//! | V007 | operator arity: pattern `and`/`or`/`->` ≥ 2, logical `not` = 1, `and`/`or` ≥ 2, scalar functions = 2 |
//! | V008 | guard durations positive, `withinmax` instance bound ≥ 1 |
//! | V009 | aggregation placement: group-by keys non-empty, non-aggregated select items are keys, no `*` with group-by, no aggregates in conditions or filters |
//! | V010 | operand kinds compatible; conditions, filters and logical operands are boolean |
//! | V011 | repetition parameters: range `low ≤ high`, distinct keys non-empty, `while`/`until` operands present |
//! | V012 | the bring group is non-empty and its output column names are unique |
//!
//! Every finding is an error; warnings are reserved.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codegen::output_columns;
use crate::model::{
    is_identifier, AggFn, ArithExpr, AttrKind, AttrRef, EventRef, EventType, Expression, GuardKind, Literal, LogicalOp,
    Operand, PatternNode, PatternOp, RepetitionKind, RuleModel, SelectItem, WindowKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Code {
    V001,
    V002,
    V003,
    V004,
    V005,
    V006,
    V007,
    V008,
    V009,
    V010,
    V011,
    V012,
}

impl Code {
    pub const ALL: [Code; 12] = [
        Code::V001,
        Code::V002,
        Code::V003,
        Code::V004,
        Code::V005,
        Code::V006,
        Code::V007,
        Code::V008,
        Code::V009,
        Code::V010,
        Code::V011,
        Code::V012,
    ];
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    /// Location in the serialized rule, e.g. `targets[0].window`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{} {sev} {}: {}", self.code, self.path, self.message)
    }
}

/// Result kind of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    String,
    Boolean,
    Timestamp,
}

impl Kind {
    fn of(kind: AttrKind) -> Kind {
        match kind {
            AttrKind::Integer | AttrKind::Float => Kind::Numeric,
            AttrKind::String => Kind::String,
            AttrKind::Boolean => Kind::Boolean,
            AttrKind::Timestamp => Kind::Timestamp,
        }
    }

    fn of_literal(l: &Literal) -> Kind {
        match l {
            Literal::Int(_) | Literal::Float(_) => Kind::Numeric,
            Literal::Str(_) => Kind::String,
            Literal::Bool(_) => Kind::Boolean,
        }
    }

    fn orderable_number(self) -> bool {
        matches!(self, Kind::Numeric | Kind::Timestamp)
    }

    fn compatible(self, other: Kind) -> bool {
        self == other || (self.orderable_number() && other.orderable_number())
    }
}

/// Runs all rules. The result is sorted by path, then code; empty means the
/// model is valid.
pub fn validate(model: &RuleModel) -> Vec<Diagnostic> {
    let mut c = Checker::default();
    c.check(model);
    c.finish()
}

/// Kind of `expr` evaluated in the rule's scope (target aliases, or pattern
/// tags for pattern rules). Paths are rooted at `condition`.
pub fn typecheck(expr: &Expression, model: &RuleModel) -> Result<Kind, Vec<Diagnostic>> {
    let mut c = Checker::default();
    let scope = Scope::for_rule(model);
    let kind = c.expr(expr, &scope, "condition", true);
    let diags = c.finish();
    match kind {
        Some(k) if diags.is_empty() => Ok(k),
        _ => Err(diags),
    }
}

/// Aliases visible to an expression, each mapped to its event type.
struct Scope<'m> {
    entries: Vec<(String, &'m EventType)>,
}

impl<'m> Scope<'m> {
    fn for_rule(model: &'m RuleModel) -> Self {
        let mut entries = Vec::new();
        match &model.pattern {
            None => {
                for t in &model.targets {
                    if let Some(ev) = model.event(&t.event_name) {
                        entries.push((t.effective_alias(), ev));
                    }
                }
            }
            Some(p) => {
                for leaf in p.leaves() {
                    if let (Some(tag), Some(ev)) = (&leaf.tag, model.scope_event(&leaf.alias)) {
                        entries.push((tag.clone(), ev));
                    }
                }
            }
        }
        Self { entries }
    }

    /// Pattern tags plus the leaf's own alias.
    fn for_filter(model: &'m RuleModel, leaf: &EventRef) -> Self {
        let mut scope = Self::for_rule(model);
        if let Some(ev) = model.scope_event(&leaf.alias) {
            scope.entries.push((leaf.alias.clone(), ev));
        }
        scope
    }

    fn lookup(&self, alias: &str) -> Option<&'m EventType> {
        self.entries.iter().find(|(a, _)| a == alias).map(|(_, e)| *e)
    }
}

#[derive(Default)]
struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, code: Code, path: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            code,
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn finish(mut self) -> Vec<Diagnostic> {
        self.diags
            .sort_by(|a, b| (&a.path, a.code, &a.message).cmp(&(&b.path, b.code, &b.message)));
        self.diags.dedup();
        self.diags
    }

    fn check(&mut self, model: &RuleModel) {
        if !is_identifier(&model.name) {
            self.push(
                Code::V002,
                "name",
                format!("rule name {:?} is not an identifier", model.name),
            );
        }
        self.events(model);
        self.targets(model);
        if let Some(p) = &model.pattern {
            self.pattern(model, p);
        }
        self.bring(model);
        let scope = Scope::for_rule(model);
        if let Some(cond) = &model.condition {
            self.boolean(cond, &scope, "condition");
        }
        if let Some(gb) = &model.group_by {
            self.group_by(model, &gb.keys, &scope);
        }
        if let Some(out) = &model.output {
            if !is_identifier(&out.name) {
                self.push(
                    Code::V002,
                    "output.name",
                    format!("output name {:?} is not an identifier", out.name),
                );
            } else if model.event(&out.name).is_some() {
                self.push(
                    Code::V002,
                    "output.name",
                    format!("output {:?} shadows a declared event", out.name),
                );
            }
        }
    }

    fn events(&mut self, model: &RuleModel) {
        let mut seen = HashSet::new();
        for (i, ev) in model.events.iter().enumerate() {
            let path = format!("events[{i}].name");
            if !is_identifier(&ev.name) {
                self.push(
                    Code::V002,
                    &path,
                    format!("event name {:?} is not an identifier", ev.name),
                );
            } else if !seen.insert(ev.name.as_str()) {
                self.push(Code::V002, &path, format!("event {:?} declared twice", ev.name));
            }
            let mut attrs = HashSet::new();
            for (j, a) in ev.attributes.iter().enumerate() {
                let path = format!("events[{i}].attributes[{j}].name");
                if !is_identifier(&a.name) {
                    self.push(
                        Code::V002,
                        &path,
                        format!("attribute name {:?} is not an identifier", a.name),
                    );
                } else if !attrs.insert(a.name.as_str()) {
                    self.push(
                        Code::V002,
                        &path,
                        format!("attribute {:?} declared twice in {}", a.name, ev.name),
                    );
                }
            }
        }
    }

    fn targets(&mut self, model: &RuleModel) {
        if model.targets.is_empty() {
            self.push(Code::V001, "targets", "the rule must bind at least one target event");
        }
        let mut aliases = HashSet::new();
        for (i, t) in model.targets.iter().enumerate() {
            let alias = t.effective_alias();
            let alias_path = if t.alias.is_some() {
                format!("targets[{i}].alias")
            } else {
                format!("targets[{i}]")
            };
            if !is_identifier(&alias) {
                self.push(Code::V002, &alias_path, format!("alias {alias:?} is not an identifier"));
            } else if !aliases.insert(alias.clone()) {
                self.push(Code::V002, &alias_path, format!("alias {alias:?} bound twice"));
            }

            let event = model.event(&t.event_name);
            if event.is_none() {
                self.push(
                    Code::V003,
                    format!("targets[{i}].event"),
                    format!("event {:?} is not declared", t.event_name),
                );
            }

            if let Some(w) = &t.window {
                let path = format!("targets[{i}].window");
                match w.kind {
                    WindowKind::Timer => {
                        if !w.seconds.is_some_and(|s| s.is_finite() && s > 0.0) || w.count.is_some() {
                            self.push(
                                Code::V006,
                                path,
                                "timer window needs a positive `seconds` and no `count`",
                            );
                        }
                    }
                    WindowKind::Counter => {
                        if !w.count.is_some_and(|c| c >= 1) || w.seconds.is_some() {
                            self.push(Code::V006, path, "counter window needs `count` >= 1 and no `seconds`");
                        }
                    }
                    WindowKind::KeepAll => {
                        if w.seconds.is_some() || w.count.is_some() {
                            self.push(Code::V006, path, "keep_all window takes no parameter");
                        }
                    }
                }
            }

            if let Some(ev) = event {
                for (j, key) in t.group_win.iter().enumerate() {
                    if ev.attribute(key).is_none() {
                        self.push(
                            Code::V004,
                            format!("targets[{i}].group_win[{j}]"),
                            format!("{} has no attribute {key:?}", ev.name),
                        );
                    }
                }
            }
        }
    }

    fn pattern(&mut self, model: &RuleModel, root: &PatternNode) {
        let tag_scope = Scope::for_rule(model);
        let mut tags = HashSet::new();
        let mut nodes = Vec::new();
        root.walk("pattern", &mut |node, path| nodes.push((node, path.to_string())));

        for (node, path) in nodes {
            let arity = |cs: &Vec<PatternNode>| cs.len() >= 2;
            match &node.op {
                PatternOp::Event(leaf) => {
                    let leaf_path = format!("{path}.op.event");
                    if model.target(&leaf.alias).is_none() {
                        self.push(
                            Code::V003,
                            format!("{leaf_path}.alias"),
                            format!("pattern refers to unknown target {:?}", leaf.alias),
                        );
                    }
                    if let Some(tag) = &leaf.tag {
                        if !is_identifier(tag) {
                            self.push(
                                Code::V002,
                                format!("{leaf_path}.tag"),
                                format!("tag {tag:?} is not an identifier"),
                            );
                        } else if !tags.insert(tag.clone()) {
                            self.push(
                                Code::V002,
                                format!("{leaf_path}.tag"),
                                format!("tag {tag:?} used twice"),
                            );
                        }
                    }
                    if let Some(filter) = &leaf.filter {
                        let scope = Scope::for_filter(model, leaf);
                        self.boolean(filter, &scope, &format!("{leaf_path}.filter"));
                    }
                }
                PatternOp::Not(_) => {}
                PatternOp::And(cs) if !arity(cs) => self.push(
                    Code::V007,
                    format!("{path}.op.and"),
                    "`and` needs at least two operands",
                ),
                PatternOp::Or(cs) if !arity(cs) => {
                    self.push(Code::V007, format!("{path}.op.or"), "`or` needs at least two operands")
                }
                PatternOp::FollowedBy(cs) if !arity(cs) => self.push(
                    Code::V007,
                    format!("{path}.op.followed_by"),
                    "followed-by needs at least two operands",
                ),
                _ => {}
            }

            if let Some(g) = &node.guard {
                let gpath = format!("{path}.guard");
                if !(g.seconds.is_finite() && g.seconds > 0.0) {
                    self.push(Code::V008, &gpath, "guard duration must be positive");
                }
                match g.kind {
                    GuardKind::WithIn if g.max_instances.is_some() => {
                        self.push(Code::V008, &gpath, "`with_in` takes no instance bound")
                    }
                    GuardKind::WithInMax if !g.max_instances.is_some_and(|m| m >= 1) => {
                        self.push(Code::V008, &gpath, "`with_in_max` needs max_instances >= 1")
                    }
                    _ => {}
                }
            }

            if let Some(rep) = &node.repetition {
                let rpath = format!("{path}.repetition");
                match rep.kind {
                    RepetitionKind::Every => {}
                    RepetitionKind::EveryDistinct => {
                        if rep.distinct_keys.is_empty() {
                            self.push(Code::V011, &rpath, "every-distinct needs at least one key");
                        }
                        for (k, key) in rep.distinct_keys.iter().enumerate() {
                            self.attr(key, &tag_scope, &format!("{rpath}.distinct_keys[{k}]"));
                        }
                    }
                    RepetitionKind::Range => match (rep.low, rep.high) {
                        (Some(lo), Some(hi)) if lo <= hi => {}
                        (Some(_), Some(_)) => self.push(Code::V011, &rpath, "range needs low <= high"),
                        _ => self.push(Code::V011, &rpath, "range needs both low and high"),
                    },
                    RepetitionKind::While => match &rep.condition {
                        Some(cond) => self.boolean(cond, &tag_scope, &format!("{rpath}.condition")),
                        None => self.push(Code::V011, &rpath, "while needs a condition"),
                    },
                    RepetitionKind::Until => {
                        if rep.until.is_none() {
                            self.push(Code::V011, &rpath, "until needs a terminating pattern");
                        }
                    }
                }
            }
        }
    }

    fn bring(&mut self, model: &RuleModel) {
        if model.bring.is_empty() {
            self.push(Code::V012, "bring", "the bring group must select at least one column");
        }
        let scope = Scope::for_rule(model);
        for (i, item) in model.bring.iter().enumerate() {
            if let SelectItem::Column { expr, alias } = item {
                self.operand(expr, &scope, &format!("bring[{i}].column.expr"), true);
                if let Some(a) = alias {
                    if !is_identifier(a) {
                        self.push(
                            Code::V002,
                            format!("bring[{i}].column.as"),
                            format!("select alias {a:?} is not an identifier"),
                        );
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for col in output_columns(model) {
            if !seen.insert(col.name.clone()) {
                self.push(
                    Code::V012,
                    format!("bring[{}]", col.item),
                    format!("output column {:?} appears twice", col.name),
                );
            }
        }
    }

    fn group_by(&mut self, model: &RuleModel, keys: &[AttrRef], scope: &Scope) {
        if keys.is_empty() {
            self.push(Code::V009, "group_by.keys", "group-by needs at least one key");
        }
        for (i, key) in keys.iter().enumerate() {
            self.attr(key, scope, &format!("group_by.keys[{i}]"));
        }
        for (i, item) in model.bring.iter().enumerate() {
            match item {
                SelectItem::Star => self.push(
                    Code::V009,
                    format!("bring[{i}]"),
                    "`*` cannot be combined with group-by",
                ),
                SelectItem::Column { expr, .. } => {
                    for r in expr.free_attrs() {
                        if !keys.contains(r) {
                            self.push(
                                Code::V009,
                                format!("bring[{i}].column.expr"),
                                format!("{}.{} is neither aggregated nor a group-by key", r.alias, r.name),
                            );
                        }
                    }
                }
            }
        }
    }

    /// Checks `expr` and requires a boolean result.
    fn boolean(&mut self, expr: &Expression, scope: &Scope, path: &str) {
        if let Some(k) = self.expr(expr, scope, path, false) {
            if k != Kind::Boolean {
                self.push(Code::V010, path, format!("expected a boolean expression, found {k:?}"));
            }
        }
    }

    fn expr(&mut self, e: &Expression, scope: &Scope, path: &str, allow_agg: bool) -> Option<Kind> {
        match e {
            Expression::Compare(c) => {
                let p = format!("{path}.compare");
                let l = self.operand(&c.lhs, scope, &format!("{p}.lhs"), allow_agg);
                let r = self.operand(&c.rhs, scope, &format!("{p}.rhs"), allow_agg);
                if let (Some(l), Some(r)) = (l, r) {
                    if !l.compatible(r) {
                        self.push(Code::V010, &p, format!("cannot compare {l:?} with {r:?}"));
                    }
                }
                Some(Kind::Boolean)
            }
            Expression::Logical(l) => {
                let p = format!("{path}.logical");
                let ok = match l.op {
                    LogicalOp::Not => l.children.len() == 1,
                    LogicalOp::And | LogicalOp::Or => l.children.len() >= 2,
                };
                if !ok {
                    self.push(Code::V007, &p, format!("wrong number of operands for {:?}", l.op));
                }
                for (i, child) in l.children.iter().enumerate() {
                    let cp = format!("{p}.children[{i}]");
                    if let Some(k) = self.expr(child, scope, &cp, allow_agg) {
                        if k != Kind::Boolean {
                            self.push(Code::V010, &cp, format!("logical operand must be boolean, found {k:?}"));
                        }
                    }
                }
                Some(Kind::Boolean)
            }
            Expression::Arith(a) => self.arith(a, scope, &format!("{path}.arith"), allow_agg),
        }
    }

    fn operand(&mut self, op: &Operand, scope: &Scope, path: &str, allow_agg: bool) -> Option<Kind> {
        match op {
            Operand::Attr(r) => self.attr(r, scope, &format!("{path}.attr")),
            Operand::Literal(l) => Some(Kind::of_literal(l)),
            Operand::Agg(call) => {
                let p = format!("{path}.agg");
                if !allow_agg {
                    self.push(Code::V009, &p, "aggregation is only allowed in the bring group");
                }
                match &call.target {
                    None if call.func != AggFn::Count => {
                        self.push(Code::V005, &p, format!("{}(*) is not defined", call.func.as_str()))
                    }
                    None => {}
                    Some(r) => {
                        let k = self.attr(r, scope, &format!("{p}.target"));
                        if call.func != AggFn::Count && k.is_some_and(|k| k != Kind::Numeric) {
                            self.push(
                                Code::V005,
                                &p,
                                format!(
                                    "{} needs a numeric attribute, {}.{} is {:?}",
                                    call.func.as_str(),
                                    r.alias,
                                    r.name,
                                    k.unwrap()
                                ),
                            );
                        }
                    }
                }
                Some(Kind::Numeric)
            }
            Operand::Scalar(call) => {
                let p = format!("{path}.scalar");
                if call.args.len() != 2 {
                    self.push(
                        Code::V007,
                        &p,
                        format!("{} takes exactly two arguments", call.func.epl_name()),
                    );
                }
                let mut result = Kind::Numeric;
                for (i, arg) in call.args.iter().enumerate() {
                    let ap = format!("{p}.args[{i}]");
                    match self.operand(arg, scope, &ap, allow_agg) {
                        Some(Kind::Timestamp) => result = Kind::Timestamp,
                        Some(Kind::Numeric) | None => {}
                        Some(k) => self.push(
                            Code::V010,
                            &ap,
                            format!("{} needs numbers or timestamps, found {k:?}", call.func.epl_name()),
                        ),
                    }
                }
                Some(result)
            }
            Operand::Arith(a) => self.arith(a, scope, &format!("{path}.arith"), allow_agg),
        }
    }

    fn arith(&mut self, a: &ArithExpr, scope: &Scope, path: &str, allow_agg: bool) -> Option<Kind> {
        for (side, op) in [("lhs", &a.lhs), ("rhs", &a.rhs)] {
            let sp = format!("{path}.{side}");
            if let Some(k) = self.operand(op, scope, &sp, allow_agg) {
                if !k.orderable_number() {
                    self.push(Code::V010, &sp, format!("arithmetic on {k:?}"));
                }
            }
        }
        Some(Kind::Numeric)
    }

    fn attr(&mut self, r: &AttrRef, scope: &Scope, path: &str) -> Option<Kind> {
        let Some(ev) = scope.lookup(&r.alias) else {
            self.push(Code::V004, path, format!("unknown alias {:?}", r.alias));
            return None;
        };
        match ev.attribute(&r.name) {
            Some(a) => Some(Kind::of(a.kind)),
            None => {
                self.push(Code::V004, path, format!("{} has no attribute {:?}", ev.name, r.name));
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArithOp, Attribute, CompareOp, TargetBinding, Window};

    fn stock() -> RuleModel {
        RuleModel::new("Avg")
            .unwrap()
            .with_event(EventType::new(
                "Tick",
                vec![
                    Attribute::new("price", AttrKind::Float),
                    Attribute::new("name", AttrKind::String),
                ],
            ))
            .with_target(TargetBinding::new("Tick").alias("t").window(Window::timer(30.0)))
    }

    fn codes(m: &RuleModel) -> Vec<Code> {
        validate(m).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn avg_over_string_is_v005() {
        let m = stock().select(SelectItem::column(Operand::agg(
            AggFn::Avg,
            Some(AttrRef::new("t", "name")),
        )));
        assert_eq!(codes(&m), vec![Code::V005]);
        let ok = stock().select(SelectItem::column(Operand::agg(
            AggFn::Count,
            Some(AttrRef::new("t", "name")),
        )));
        assert!(validate(&ok).is_empty());
    }

    #[test]
    fn zero_targets_is_v001() {
        let m = RuleModel::new("Empty").unwrap().select(SelectItem::Star);
        assert_eq!(codes(&m), vec![Code::V001]);
    }

    #[test]
    fn typecheck_kinds() {
        let m = stock();
        let ge = Expression::compare(CompareOp::Ge, Operand::attr("t", "price"), Operand::int(200));
        assert_eq!(typecheck(&ge, &m), Ok(Kind::Boolean));
        let sum = Expression::Arith(ArithExpr {
            op: ArithOp::Add,
            lhs: Box::new(Operand::int(200)),
            rhs: Box::new(Operand::boolean(true)),
        });
        let err = typecheck(&sum, &m).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].code, Code::V010);
        assert_eq!(err[0].path, "condition.arith.rhs");
        let ghost = Expression::compare(CompareOp::Eq, Operand::attr("g", "x"), Operand::int(1));
        assert_eq!(typecheck(&ghost, &m).unwrap_err()[0].code, Code::V004);
    }

    #[test]
    fn timestamps_compare_with_numbers() {
        let m = RuleModel::new("T")
            .unwrap()
            .with_event(EventType::new("E", vec![Attribute::new("at", AttrKind::Timestamp)]))
            .with_target(TargetBinding::new("E").alias("e"));
        let e = Expression::compare(CompareOp::Gt, Operand::attr("e", "at"), Operand::int(5));
        assert_eq!(typecheck(&e, &m), Ok(Kind::Boolean));
        let s = Expression::compare(CompareOp::Gt, Operand::attr("e", "at"), Operand::string("x"));
        assert!(typecheck(&s, &m).is_err());
    }

    #[test]
    fn diagnostics_are_sorted_and_deterministic() {
        let mut m = RuleModel::new("x")
            .unwrap()
            .with_target(TargetBinding::new("Nope").window(Window::counter(0)));
        m.name = "bad name".into();
        let a = validate(&m);
        assert_eq!(a, validate(&m));
        let paths: Vec<&str> = a.iter().map(|d| d.path.as_str()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
        assert!(a.iter().any(|d| d.code == Code::V003));
        assert!(a.iter().any(|d| d.code == Code::V006));
        assert!(a.iter().any(|d| d.code == Code::V002));
    }

    #[test]
    fn group_by_requires_keys_in_select() {
        let base = stock().group_by(vec![AttrRef::new("t", "name")]);
        let good = base
            .clone()
            .select(SelectItem::column(Operand::attr("t", "name")))
            .select(SelectItem::column(Operand::agg(AggFn::Count, None)));
        assert!(validate(&good).is_empty());
        let bad = base.select(SelectItem::column(Operand::attr("t", "price")));
        assert_eq!(codes(&bad), vec![Code::V009]);
    }

    #[test]
    fn aggregate_in_condition_is_v009() {
        let m = stock().select(SelectItem::Star).when(Expression::compare(
            CompareOp::Gt,
            Operand::agg(AggFn::Avg, Some(AttrRef::new("t", "price"))),
            Operand::int(1),
        ));
        assert_eq!(codes(&m), vec![Code::V009]);
    }
}
