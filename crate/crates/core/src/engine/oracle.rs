//! Brute-force reference semantics.
//!
//! Every prefix of the stream is evaluated from scratch: window contents
//! are recomputed by scanning the prefix, joins are full products, and
//! pattern outcomes are derived directly from their definition rather than
//! from incremental state. Rows are reported for the prefix's last event.
//! Expressions are interpreted straight off the model tree.

use std::collections::{BTreeMap, HashMap};

use super::value::{self, Accumulator, Value};
use super::{admit, conform, EngineError, Ev, OutputRow, TimedEvent};
use crate::codegen::{output_columns, ColumnSource, OutputColumn};
use crate::model::{
    AggCall, AttrRef, EventRef, Expression, GuardKind, LogicalOp, Operand, PatternNode, PatternOp, RepetitionKind,
    RuleModel, SelectItem, WindowKind,
};

pub fn oracle(model: &RuleModel, events: &[TimedEvent]) -> Result<Vec<OutputRow>, EngineError> {
    let model = admit(model)?;
    let mut evs = Vec::with_capacity(events.len());
    let mut last: Option<i64> = None;
    for (i, raw) in events.iter().enumerate() {
        if raw.timestamp < 0 {
            return Err(EngineError::NegativeTimestamp(raw.timestamp));
        }
        if let Some(l) = last.filter(|l| raw.timestamp < *l) {
            return Err(EngineError::OutOfOrder {
                timestamp: raw.timestamp,
                last: l,
            });
        }
        evs.push(conform(&model, raw, i as u64)?);
        last = Some(raw.timestamp);
    }
    let columns = output_columns(&model);
    let mut out = Vec::new();
    for k in 0..evs.len() {
        match &model.pattern {
            None => stream_prefix(&model, &columns, &evs, k, &mut out),
            Some(p) => pattern_prefix(&model, &columns, p, &evs, k, &mut out),
        }
    }
    Ok(out)
}

fn attr_value(ev: &Ev, name: &str) -> Value {
    ev.event.attrs.get(name).cloned().unwrap_or(Value::Null)
}

fn eval_operand(op: &Operand, env: &dyn Fn(&AttrRef) -> Value, agg: &dyn Fn(&AggCall) -> Value) -> Value {
    match op {
        Operand::Attr(r) => env(r),
        Operand::Literal(l) => Value::from_literal(l),
        Operand::Agg(call) => agg(call),
        Operand::Scalar(call) => {
            let a = call.args.first().map_or(Value::Null, |a| eval_operand(a, env, agg));
            let b = call.args.get(1).map_or(Value::Null, |b| eval_operand(b, env, agg));
            value::scalar(call.func, &a, &b)
        }
        Operand::Arith(a) => value::arith(a.op, &eval_operand(&a.lhs, env, agg), &eval_operand(&a.rhs, env, agg)),
    }
}

fn eval_expr(e: &Expression, env: &dyn Fn(&AttrRef) -> Value) -> Value {
    let no_agg = |_: &AggCall| Value::Null;
    match e {
        Expression::Compare(c) => value::compare(
            c.op,
            &eval_operand(&c.lhs, env, &no_agg),
            &eval_operand(&c.rhs, env, &no_agg),
        ),
        Expression::Logical(l) => {
            let vals = l.children.iter().map(|c| eval_expr(c, env));
            match l.op {
                LogicalOp::And => value::and(vals),
                LogicalOp::Or => value::or(vals),
                LogicalOp::Not => value::not(&eval_expr(&l.children[0], env)),
            }
        }
        Expression::Arith(a) => value::arith(
            a.op,
            &eval_operand(&a.lhs, env, &no_agg),
            &eval_operand(&a.rhs, env, &no_agg),
        ),
    }
}

fn holds(e: &Option<Expression>, env: &dyn Fn(&AttrRef) -> Value) -> bool {
    e.as_ref().is_none_or(|e| eval_expr(e, env) == Value::Bool(true))
}

fn project(
    model: &RuleModel,
    columns: &[OutputColumn<'_>],
    at: i64,
    env: &dyn Fn(&AttrRef) -> Value,
    agg: &dyn Fn(&AggCall) -> Value,
) -> OutputRow {
    OutputRow {
        emitted_at: at,
        values: columns
            .iter()
            .map(|c| {
                let v = match &c.source {
                    ColumnSource::Attr(r) => env(r),
                    ColumnSource::Expr(op) => eval_operand(op, env, agg),
                };
                (c.name.clone(), v)
            })
            .collect(),
        derived_event_name: model.output.as_ref().map(|o| o.name.clone()),
    }
}

// ---- windows and joins ----

fn stream_prefix(model: &RuleModel, columns: &[OutputColumn<'_>], evs: &[Ev], k: usize, out: &mut Vec<OutputRow>) {
    let now = evs[k].ts;
    let windows: Vec<Vec<usize>> = model
        .targets
        .iter()
        .map(|t| {
            let same_part = |a: &Ev, b: &Ev| t.group_win.iter().all(|g| attr_value(a, g) == attr_value(b, g));
            (0..=k)
                .filter(|&j| evs[j].event.type_name == t.event_name)
                .filter(|&j| match t.window.as_ref().map(|w| w.kind) {
                    Some(WindowKind::Timer) => {
                        let secs = t.window.as_ref().and_then(|w| w.seconds).unwrap_or(0.0);
                        ((now - evs[j].ts) as f64) < secs * 1000.0
                    }
                    Some(WindowKind::Counter) => {
                        let n = t.window.as_ref().and_then(|w| w.count).unwrap_or(0);
                        let newer = (j + 1..=k)
                            .filter(|&i| evs[i].event.type_name == t.event_name && same_part(&evs[i], &evs[j]))
                            .count();
                        (newer as i64) < n
                    }
                    Some(WindowKind::KeepAll) | None => true,
                })
                .collect()
        })
        .collect();

    let mut rows: Vec<Vec<usize>> = vec![Vec::new()];
    for w in &windows {
        rows = rows
            .iter()
            .flat_map(|r| {
                w.iter().map(move |&j| {
                    let mut r = r.clone();
                    r.push(j);
                    r
                })
            })
            .collect();
    }

    let env_of = |row: &[usize]| {
        let row = row.to_vec();
        move |r: &AttrRef| match model.target(&r.alias) {
            Some((i, _)) => row.get(i).map_or(Value::Null, |&j| attr_value(&evs[j], &r.name)),
            None => Value::Null,
        }
    };
    let passing: Vec<Vec<usize>> = rows
        .into_iter()
        .filter(|r| holds(&model.condition, &env_of(r)))
        .collect();
    let fresh: Vec<&Vec<usize>> = passing.iter().filter(|r| r.contains(&k)).collect();
    if fresh.is_empty() {
        return;
    }

    let has_aggs = model.bring.iter().any(|item| match item {
        SelectItem::Star => false,
        SelectItem::Column { expr, .. } => expr.contains_aggregate(),
    });
    let at = evs[k].ts;
    let agg_over = |members: &[&Vec<usize>], call: &AggCall| {
        let mut acc = Accumulator::new(call.func);
        for m in members {
            match &call.target {
                None => acc.push_row(),
                Some(r) => acc.push(&env_of(m)(r)),
            }
        }
        acc.finish()
    };

    match &model.group_by {
        Some(g) => {
            let key = |r: &[usize]| g.keys.iter().map(|a| env_of(r)(a)).collect::<Vec<Value>>();
            let mut done: Vec<Vec<Value>> = Vec::new();
            for r in &fresh {
                let kv = key(r);
                if done.contains(&kv) {
                    continue;
                }
                let members: Vec<&Vec<usize>> = passing.iter().filter(|w| key(w) == kv).collect();
                out.push(project(model, columns, at, &env_of(r), &|c| agg_over(&members, c)));
                done.push(kv);
            }
        }
        None if !has_aggs => {
            for r in &fresh {
                out.push(project(model, columns, at, &env_of(r), &|_| Value::Null));
            }
        }
        None => {
            let all_aggregated = model.bring.iter().all(|item| match item {
                SelectItem::Star => false,
                SelectItem::Column { expr, .. } => expr.free_attrs().is_empty(),
            });
            let members: Vec<&Vec<usize>> = passing.iter().collect();
            let agg = |c: &AggCall| agg_over(&members, c);
            if all_aggregated {
                out.push(project(model, columns, at, &env_of(fresh[0]), &agg));
            } else {
                for r in &fresh {
                    out.push(project(model, columns, at, &env_of(r), &agg));
                }
            }
        }
    }
}

// ---- patterns ----

type Bind = BTreeMap<usize, usize>;

#[derive(Debug, Clone)]
enum Outcome {
    Complete(usize, Bind),
    /// (index, phase, restart). Phases: guard expiry 0, negation 2.
    Dead(usize, u8, usize),
    Pending,
}

impl Outcome {
    /// Resolution key; completion ranks between the two death phases.
    fn key(&self) -> (usize, u8) {
        match self {
            Outcome::Complete(e, _) => (*e, 1),
            Outcome::Dead(i, p, _) => (*i, *p),
            Outcome::Pending => (usize::MAX, u8::MAX),
        }
    }
}

struct Patterns<'a> {
    model: &'a RuleModel,
    evs: &'a [Ev],
    k: usize,
    ids: HashMap<*const EventRef, usize>,
    tags: HashMap<String, usize>,
    slots: usize,
}

fn pattern_prefix(
    model: &RuleModel,
    columns: &[OutputColumn<'_>],
    root: &PatternNode,
    evs: &[Ev],
    k: usize,
    out: &mut Vec<OutputRow>,
) {
    let leaves = root.leaves();
    let ctx = Patterns {
        model,
        evs,
        k,
        ids: leaves
            .iter()
            .enumerate()
            .map(|(i, l)| (*l as *const EventRef, i))
            .collect(),
        tags: leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| Some((l.tag.clone()?, i)))
            .collect(),
        slots: leaves.len(),
    };
    let mut found: Vec<Bind> = if ctx.infinite(root) {
        ctx.matches(root, 0, &Bind::new())
            .into_iter()
            .filter(|(end, _)| *end == k)
            .map(|(_, b)| b)
            .collect()
    } else {
        match ctx.outcome(root, 0, &Bind::new()).0 {
            Outcome::Complete(end, b) if end == k => vec![b],
            _ => Vec::new(),
        }
    };
    found.sort_by_key(|b| (0..ctx.slots).map(|s| b.get(&s).copied()).collect::<Vec<_>>());
    for b in found {
        let env = |r: &AttrRef| {
            ctx.tags
                .get(&r.alias)
                .and_then(|slot| b.get(slot))
                .map_or(Value::Null, |&j| attr_value(&evs[j], &r.name))
        };
        if holds(&model.condition, &env) {
            out.push(project(model, columns, evs[k].ts, &env, &|_| Value::Null));
        }
    }
}

fn union(a: &Bind, b: &Bind) -> Bind {
    let mut out = a.clone();
    out.extend(b.iter().map(|(k, v)| (*k, *v)));
    out
}

impl Patterns<'_> {
    fn every(n: &PatternNode) -> bool {
        n.repetition.as_ref().is_some_and(|r| r.kind == RepetitionKind::Every)
    }

    fn infinite(&self, n: &PatternNode) -> bool {
        Self::every(n)
            || match &n.op {
                PatternOp::Event(_) | PatternOp::Not(_) => false,
                PatternOp::And(cs) | PatternOp::Or(cs) | PatternOp::FollowedBy(cs) => {
                    cs.iter().any(|c| self.infinite(c))
                }
            }
    }

    fn guard_ms(n: &PatternNode) -> Option<f64> {
        n.guard
            .as_ref()
            .filter(|g| g.kind == GuardKind::WithIn)
            .map(|g| g.seconds * 1000.0)
    }

    /// First index at or after `s` accepted by the leaf.
    fn leaf_match(&self, leaf: &EventRef, s: usize, ctx: &Bind) -> Option<usize> {
        let event = &self.model.target(&leaf.alias)?.1.event_name;
        (s..=self.k).find(|&i| {
            let cand = &self.evs[i];
            if &cand.event.type_name != event {
                return false;
            }
            let env = |r: &AttrRef| {
                if r.alias == leaf.alias || leaf.tag.as_deref() == Some(r.alias.as_str()) {
                    return attr_value(cand, &r.name);
                }
                self.tags
                    .get(&r.alias)
                    .and_then(|slot| ctx.get(slot))
                    .map_or(Value::Null, |&j| attr_value(&self.evs[j], &r.name))
            };
            holds(&leaf.filter, &env)
        })
    }

    /// Single attempt at a finite node starting at `s`, with the earliest
    /// index consumed before it resolved.
    fn outcome(&self, n: &PatternNode, s: usize, ctx: &Bind) -> (Outcome, Option<usize>) {
        let (o, first) = self.op_outcome(n, s, ctx);
        if let (Some(ms), Some(f)) = (Self::guard_ms(n), first) {
            let limit = match &o {
                Outcome::Complete(e, _) => *e,
                Outcome::Dead(i, _, _) => *i,
                Outcome::Pending => self.k,
            };
            for g in f + 1..=limit {
                if ((self.evs[g].ts - self.evs[f].ts) as f64) >= ms {
                    if (g, 0) < o.key() {
                        return (Outcome::Dead(g, 0, g), first);
                    }
                    break;
                }
            }
        }
        (o, first)
    }

    fn op_outcome(&self, n: &PatternNode, s: usize, ctx: &Bind) -> (Outcome, Option<usize>) {
        match &n.op {
            PatternOp::Event(leaf) => match self.leaf_match(leaf, s, ctx) {
                Some(i) => {
                    let id = self.ids[&(leaf as *const EventRef)];
                    (Outcome::Complete(i, Bind::from([(id, i)])), Some(i))
                }
                None => (Outcome::Pending, None),
            },
            PatternOp::FollowedBy(stages) => {
                let mut acc = Bind::new();
                let mut pos = s;
                let mut first = None;
                let mut end = s;
                for (i, stage) in stages.iter().enumerate() {
                    let (o, f) = self.outcome(stage, pos, &union(ctx, &acc));
                    if i == 0 {
                        first = f;
                    }
                    match o {
                        Outcome::Complete(e, b) => {
                            acc.extend(b);
                            pos = e + 1;
                            end = e;
                        }
                        other => return (other, first),
                    }
                }
                (Outcome::Complete(end, acc), first)
            }
            PatternOp::And(cs) => {
                let mut results = Vec::new();
                let mut negation = None;
                for c in cs {
                    match &c.op {
                        PatternOp::Not(inner) => {
                            if let PatternOp::Event(leaf) = &inner.op {
                                if let Some(i) = self.leaf_match(leaf, s, ctx) {
                                    negation = Some(negation.map_or(i, |n: usize| n.min(i)));
                                }
                            }
                        }
                        _ => results.push(self.outcome(c, s, ctx)),
                    }
                }
                let mut resolved: Vec<Outcome> = results
                    .iter()
                    .filter(|(o, _)| matches!(o, Outcome::Dead(..)))
                    .map(|(o, _)| o.clone())
                    .collect();
                if let Some(i) = negation {
                    resolved.push(Outcome::Dead(i, 2, i + 1));
                }
                if results.iter().all(|(o, _)| matches!(o, Outcome::Complete(..))) {
                    let mut bind = Bind::new();
                    let mut end = 0;
                    for (o, _) in &results {
                        if let Outcome::Complete(e, b) = o {
                            end = end.max(*e);
                            bind.extend(b.iter().map(|(k, v)| (*k, *v)));
                        }
                    }
                    resolved.push(Outcome::Complete(end, bind));
                }
                let o = resolved
                    .into_iter()
                    .min_by_key(Outcome::key)
                    .unwrap_or(Outcome::Pending);
                let limit = match &o {
                    Outcome::Pending => self.k,
                    o => o.key().0,
                };
                let first = results.iter().filter_map(|(_, f)| *f).filter(|f| *f <= limit).min();
                (o, first)
            }
            PatternOp::Or(cs) => {
                let results: Vec<(Outcome, Option<usize>)> = cs.iter().map(|c| self.outcome(c, s, ctx)).collect();
                let winner = results
                    .iter()
                    .filter_map(|(o, _)| match o {
                        Outcome::Complete(e, _) => Some((*e, o.clone())),
                        _ => None,
                    })
                    .min_by_key(|(e, _)| *e)
                    .map(|(_, o)| o);
                let o = match winner {
                    Some(w) => w,
                    None if results.iter().all(|(o, _)| matches!(o, Outcome::Dead(..))) => results
                        .iter()
                        .map(|(o, _)| o.clone())
                        .max_by_key(Outcome::key)
                        .unwrap_or(Outcome::Pending),
                    None => Outcome::Pending,
                };
                let limit = match &o {
                    Outcome::Pending => self.k,
                    o => o.key().0,
                };
                let first = results.iter().filter_map(|(_, f)| *f).filter(|f| *f <= limit).min();
                (o, first)
            }
            PatternOp::Not(_) => (Outcome::Pending, None),
        }
    }

    /// All matches of an infinite node starting at `s`, as (end, binding).
    fn matches(&self, n: &PatternNode, s: usize, ctx: &Bind) -> Vec<(usize, Bind)> {
        if Self::every(n) {
            let mut out = Vec::new();
            let mut s = s;
            while s <= self.k {
                match self.outcome(n, s, ctx).0 {
                    Outcome::Complete(e, b) => {
                        out.push((e, b));
                        s = e + 1;
                    }
                    Outcome::Dead(_, _, r) => s = r,
                    Outcome::Pending => break,
                }
            }
            return out;
        }
        let mut found = match &n.op {
            PatternOp::FollowedBy(stages) => self.sequence(stages, s, ctx, &Bind::new(), None),
            PatternOp::And(cs) => {
                let mut lists = Vec::new();
                let mut negation: Option<usize> = None;
                for c in cs {
                    match &c.op {
                        PatternOp::Not(inner) => {
                            if let PatternOp::Event(leaf) = &inner.op {
                                if let Some(i) = self.leaf_match(leaf, s, ctx) {
                                    negation = Some(negation.map_or(i, |n| n.min(i)));
                                }
                            }
                        }
                        _ => lists.push(self.one_or_many(c, s, ctx)),
                    }
                }
                let mut combos: Vec<(usize, Bind)> = vec![(0, Bind::new())];
                for list in &lists {
                    combos = combos
                        .iter()
                        .flat_map(|(e0, b0)| list.iter().map(move |(e, b)| ((*e0).max(*e), union(b0, b))))
                        .collect();
                }
                combos.retain(|(e, _)| negation.is_none_or(|n| *e <= n));
                combos
            }
            _ => Vec::new(),
        };
        if let Some(ms) = Self::guard_ms(n) {
            found.retain(|(e, b)| {
                let first = b.values().map(|&j| self.evs[j].ts).min().unwrap_or(self.evs[*e].ts);
                ((self.evs[*e].ts - first) as f64) < ms
            });
        }
        found
    }

    fn one_or_many(&self, n: &PatternNode, s: usize, ctx: &Bind) -> Vec<(usize, Bind)> {
        if self.infinite(n) {
            self.matches(n, s, ctx)
        } else {
            match self.outcome(n, s, ctx).0 {
                Outcome::Complete(e, b) => vec![(e, b)],
                _ => Vec::new(),
            }
        }
    }

    fn sequence(
        &self,
        stages: &[PatternNode],
        s: usize,
        ctx: &Bind,
        acc: &Bind,
        end: Option<usize>,
    ) -> Vec<(usize, Bind)> {
        let Some((stage, rest)) = stages.split_first() else {
            return end.map(|e| (e, acc.clone())).into_iter().collect();
        };
        if s > self.k {
            return Vec::new();
        }
        self.one_or_many(stage, s, &union(ctx, acc))
            .into_iter()
            .flat_map(|(e, b)| self.sequence(rest, e + 1, ctx, &union(acc, &b), Some(e)))
            .collect()
    }
}
