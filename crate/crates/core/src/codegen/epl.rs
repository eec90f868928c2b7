//! Esper EPL generation.
//!
//! Statement layout: an optional `insert into` line, then one line holding
//! `select ... from ... [where ...] [group by ...]`. Single-stream rules use
//! unqualified property names; joins and patterns qualify every reference.

use super::{fmt_number, CodegenError, GeneratedSource, Target};
use crate::model::{
    AggCall, ArithExpr, AttrRef, EventRef, Expression, GuardKind, Literal, LogicalOp, Operand, PatternGuard,
    PatternNode, PatternOp, RepetitionKind, RuleModel, SelectItem, TargetBinding, Window, WindowKind,
};
use crate::validator::validate;

/// How attribute references are printed.
#[derive(Debug, Clone)]
pub(crate) struct RefStyle {
    pub qualify: bool,
    /// Aliases printed without qualification even when `qualify` is set:
    /// the leaf's own alias and tag inside a pattern filter.
    own: Vec<String>,
}

impl RefStyle {
    pub fn for_rule(model: &RuleModel) -> Self {
        Self {
            qualify: model.pattern.is_some() || model.targets.len() > 1,
            own: Vec::new(),
        }
    }

    fn for_filter(leaf: &EventRef) -> Self {
        let mut own = vec![leaf.alias.clone()];
        own.extend(leaf.tag.clone());
        Self { qualify: true, own }
    }

    fn attr(&self, r: &AttrRef) -> String {
        if !self.qualify || self.own.contains(&r.alias) {
            r.name.clone()
        } else {
            format!("{}.{}", r.alias, r.name)
        }
    }
}

pub fn generate_epl(model: &RuleModel) -> Result<GeneratedSource, CodegenError> {
    let diagnostics = validate(model);
    if !diagnostics.is_empty() {
        return Err(CodegenError::Invalid(diagnostics));
    }
    Ok(GeneratedSource::new(Target::Epl, render_statement(model)))
}

/// Pattern text for `pattern`, resolving leaf aliases against `model`.
pub fn generate_pattern_fragment(model: &RuleModel, pattern: &PatternNode) -> String {
    render_node(model, pattern, false)
}

fn render_statement(model: &RuleModel) -> String {
    let style = RefStyle::for_rule(model);
    let mut text = String::new();
    if let Some(out) = &model.output {
        text.push_str(&format!("insert into {}\n", out.name));
    }
    let items: Vec<String> = model
        .bring
        .iter()
        .map(|item| match item {
            SelectItem::Star => "*".to_string(),
            SelectItem::Column { expr, alias: None } => render_operand(expr, &style),
            SelectItem::Column { expr, alias: Some(a) } => format!("{} as {a}", render_operand(expr, &style)),
        })
        .collect();
    text.push_str("select ");
    text.push_str(&items.join(", "));
    text.push_str(" from ");
    match &model.pattern {
        Some(p) => text.push_str(&format!("pattern [{}]", render_node(model, p, false))),
        None => {
            let multi = model.targets.len() > 1;
            let streams: Vec<String> = model.targets.iter().map(|t| render_stream(t, multi)).collect();
            text.push_str(&streams.join(", "));
        }
    }
    if let Some(cond) = &model.condition {
        text.push_str(" where ");
        text.push_str(&render_expr(cond, &style));
    }
    if let Some(gb) = &model.group_by {
        let keys: Vec<String> = gb.keys.iter().map(|k| style.attr(k)).collect();
        text.push_str(" group by ");
        text.push_str(&keys.join(", "));
    }
    text
}

fn render_stream(t: &TargetBinding, multi: bool) -> String {
    let mut s = t.event_name.clone();
    if !t.group_win.is_empty() {
        s.push_str(&format!(".std:groupwin({})", t.group_win.join(",")));
    }
    if let Some(w) = &t.window {
        s.push_str(&render_window(w));
    }
    if multi {
        s.push_str(" as ");
        s.push_str(&t.effective_alias());
    }
    s
}

fn render_window(w: &Window) -> String {
    match w.kind {
        WindowKind::Timer => format!(".win:time({} sec)", fmt_number(w.seconds.unwrap_or_default())),
        WindowKind::Counter => format!(".win:length({})", w.count.unwrap_or_default()),
        WindowKind::KeepAll => ".win:keepall()".to_string(),
    }
}

fn render_node(model: &RuleModel, node: &PatternNode, as_child: bool) -> String {
    let join = |cs: &[PatternNode], sep: &str| {
        let parts: Vec<String> = cs.iter().map(|c| render_node(model, c, true)).collect();
        format!("({})", parts.join(sep))
    };
    let mut text = match &node.op {
        PatternOp::Event(e) => render_leaf(model, e),
        PatternOp::Not(c) => format!("not {}", render_node(model, c, true)),
        PatternOp::And(cs) => join(cs, " and "),
        PatternOp::Or(cs) => join(cs, " or "),
        PatternOp::FollowedBy(cs) => join(cs, " -> "),
    };
    let mut decorated = false;
    if let Some(g) = &node.guard {
        text = format!("{text} where {}", render_guard(g));
        decorated = true;
    }
    if let Some(rep) = &node.repetition {
        let inner = if decorated { format!("({text})") } else { text };
        let tags = RefStyle::for_rule(model);
        text = match rep.kind {
            RepetitionKind::Every => format!("every {inner}"),
            RepetitionKind::EveryDistinct => {
                let keys: Vec<String> = rep.distinct_keys.iter().map(|k| tags.attr(k)).collect();
                format!("every-distinct({}) {inner}", keys.join(", "))
            }
            RepetitionKind::Range => format!(
                "[{}:{}] {inner}",
                rep.low.unwrap_or_default(),
                rep.high.unwrap_or_default()
            ),
            RepetitionKind::While => {
                let cond = rep
                    .condition
                    .as_ref()
                    .map(|c| render_expr(c, &tags))
                    .unwrap_or_default();
                format!("{inner} while ({cond})")
            }
            RepetitionKind::Until => {
                let until = rep
                    .until
                    .as_deref()
                    .map(|u| render_node(model, u, true))
                    .unwrap_or_default();
                format!("{inner} until {until}")
            }
        };
        decorated = true;
    }
    if as_child && decorated {
        format!("({text})")
    } else {
        text
    }
}

fn render_leaf(model: &RuleModel, leaf: &EventRef) -> String {
    let event = model
        .target(&leaf.alias)
        .map(|(_, t)| t.event_name.clone())
        .unwrap_or_else(|| leaf.alias.clone());
    let filter = leaf
        .filter
        .as_ref()
        .map(|f| render_expr(f, &RefStyle::for_filter(leaf)));
    match (&leaf.tag, filter) {
        (None, None) => event,
        (None, Some(f)) => format!("{event}({f})"),
        (Some(tag), f) => format!("{tag}={event}({})", f.unwrap_or_default()),
    }
}

fn render_guard(g: &PatternGuard) -> String {
    match g.kind {
        GuardKind::WithIn => format!("timer:within({} sec)", fmt_number(g.seconds)),
        GuardKind::WithInMax => format!(
            "timer:withinmax({} sec, {})",
            fmt_number(g.seconds),
            g.max_instances.unwrap_or_default()
        ),
    }
}

pub(crate) fn render_expr(e: &Expression, style: &RefStyle) -> String {
    match e {
        Expression::Compare(c) => format!(
            "{} {} {}",
            render_operand(&c.lhs, style),
            c.op.symbol(),
            render_operand(&c.rhs, style)
        ),
        Expression::Logical(l) => {
            let parts: Vec<String> = l
                .children
                .iter()
                .map(|c| match c {
                    Expression::Logical(_) => format!("({})", render_expr(c, style)),
                    _ => render_expr(c, style),
                })
                .collect();
            match l.op {
                LogicalOp::And => parts.join(" and "),
                LogicalOp::Or => parts.join(" or "),
                LogicalOp::Not => {
                    let inner: Vec<String> = l.children.iter().map(|c| render_expr(c, style)).collect();
                    format!("not ({})", inner.join(" and "))
                }
            }
        }
        Expression::Arith(a) => render_arith(a, style),
    }
}

pub(crate) fn render_operand(op: &Operand, style: &RefStyle) -> String {
    match op {
        Operand::Attr(r) => style.attr(r),
        Operand::Literal(l) => render_literal(l),
        Operand::Agg(AggCall { func, target }) => match target {
            Some(t) => format!("{}({})", func.as_str(), style.attr(t)),
            None => format!("{}(*)", func.as_str()),
        },
        Operand::Scalar(call) => {
            let args: Vec<String> = call.args.iter().map(|a| render_operand(a, style)).collect();
            format!("{}({})", call.func.epl_name(), args.join(", "))
        }
        Operand::Arith(a) => render_arith(a, style),
    }
}

fn render_arith(a: &ArithExpr, style: &RefStyle) -> String {
    let side = |o: &Operand| match o {
        Operand::Arith(_) => format!("({})", render_operand(o, style)),
        _ => render_operand(o, style),
    };
    format!("{} {} {}", side(&a.lhs), a.op.symbol(), side(&a.rhs))
}

pub(crate) fn render_literal(l: &Literal) -> String {
    match l {
        Literal::Int(v) => v.to_string(),
        Literal::Float(v) => fmt_number(*v),
        Literal::Str(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
        Literal::Bool(b) => b.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttrKind, Attribute, EventType, TargetBinding};

    fn abc() -> RuleModel {
        let ev = |n: &str| EventType::new(n, vec![Attribute::new("v", AttrKind::Integer)]);
        RuleModel::new("P")
            .unwrap()
            .with_event(ev("A"))
            .with_event(ev("B"))
            .with_event(ev("C"))
            .with_target(TargetBinding::new("A"))
            .with_target(TargetBinding::new("B"))
            .with_target(TargetBinding::new("C"))
    }

    #[test]
    fn followed_by_with_guard() {
        let p = PatternNode::followed_by(vec![PatternNode::event("a"), PatternNode::event("b")]).within(10.0);
        assert_eq!(
            generate_pattern_fragment(&abc(), &p),
            "(A -> B) where timer:within(10 sec)"
        );
    }

    #[test]
    fn every_tagged_leaf() {
        let p = PatternNode::tagged("a", "a").every();
        assert_eq!(generate_pattern_fragment(&abc(), &p), "every a=A()");
    }

    #[test]
    fn not_inside_and() {
        let p = PatternNode::and(vec![PatternNode::event("b"), PatternNode::not(PatternNode::event("c"))]);
        assert_eq!(generate_pattern_fragment(&abc(), &p), "(B and not C)");
    }

    #[test]
    fn decorated_children_are_parenthesized() {
        let p = PatternNode::followed_by(vec![
            PatternNode::tagged("a", "x").every(),
            PatternNode::and(vec![PatternNode::event("b"), PatternNode::not(PatternNode::event("c"))]).within(2.5),
        ]);
        assert_eq!(
            generate_pattern_fragment(&abc(), &p),
            "((every x=A()) -> ((B and not C) where timer:within(2.5 sec)))"
        );
    }

    #[test]
    fn every_wraps_guarded_node() {
        let p = PatternNode::followed_by(vec![PatternNode::event("a"), PatternNode::event("b")])
            .within(5.0)
            .every();
        assert_eq!(
            generate_pattern_fragment(&abc(), &p),
            "every ((A -> B) where timer:within(5 sec))"
        );
    }

    #[test]
    fn repetition_forms() {
        use crate::model::{CompareOp, RepetitionSpec};
        let m = abc();
        let leaf = || PatternNode::tagged("a", "x");
        let cases = [
            (
                leaf().with_repetition(RepetitionSpec::every_distinct(vec![AttrRef::new("x", "v")])),
                "every-distinct(x.v) x=A()",
            ),
            (leaf().with_repetition(RepetitionSpec::range(2, 4)), "[2:4] x=A()"),
            (
                leaf().with_repetition(RepetitionSpec::while_cond(Expression::compare(
                    CompareOp::Gt,
                    Operand::attr("x", "v"),
                    Operand::int(0),
                ))),
                "x=A() while (x.v > 0)",
            ),
            (
                leaf().with_repetition(RepetitionSpec::until(PatternNode::event("b"))),
                "x=A() until B",
            ),
            (
                PatternNode::event("a").with_guard(PatternGuard::within_max(3.0, 2)),
                "A where timer:withinmax(3 sec, 2)",
            ),
        ];
        for (node, expected) in cases {
            assert_eq!(generate_pattern_fragment(&m, &node), expected);
        }
    }

    #[test]
    fn filters_qualify_foreign_tags_only() {
        use crate::model::CompareOp;
        let p = PatternNode::followed_by(vec![
            PatternNode::tagged("a", "x"),
            PatternNode::tagged("b", "y").with_filter(Expression::compare(
                CompareOp::Eq,
                Operand::attr("y", "v"),
                Operand::attr("x", "v"),
            )),
        ]);
        assert_eq!(generate_pattern_fragment(&abc(), &p), "(x=A() -> y=B(v = x.v))");
    }

    #[test]
    fn literals() {
        assert_eq!(render_literal(&Literal::Str("it's".into())), "'it\\'s'");
        assert_eq!(render_literal(&Literal::Float(200.0)), "200");
        assert_eq!(render_literal(&Literal::Bool(true)), "true");
    }

    #[test]
    fn nested_arithmetic_keeps_grouping() {
        use crate::model::ArithOp;
        let op = Operand::arith(
            ArithOp::Mul,
            Operand::arith(ArithOp::Add, Operand::attr("a", "x"), Operand::int(1)),
            Operand::int(2),
        );
        assert_eq!(
            render_operand(
                &op,
                &RefStyle {
                    qualify: false,
                    own: Vec::new()
                }
            ),
            "(x + 1) * 2"
        );
    }
}
