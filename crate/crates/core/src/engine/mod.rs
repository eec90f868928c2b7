//! Reference interpreter for rule models over timestamped event streams.
//!
//! Time is logical: the timestamp of the event being pushed is "now". Rows
//! are emitted when events enter windows (insert stream only). A timer
//! window of `s` seconds evicts an event once `now - ts >= s * 1000`; a
//! counter window keeps the last `n` events; no window keeps everything.
//! `groupwin` keys partition a target into independent windows.
//!
//! A push joins the target windows, keeps the rows that contain the new
//! event and pass the condition, and projects them. Aggregates range over
//! every joined row that passes the condition. With group-by, one row is
//! emitted per group touched by the new event; with only aggregates in the
//! select list, one row per push.

mod compile;
pub mod oracle;
mod pattern;
pub mod value;

use std::collections::VecDeque;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{output_columns, ColumnSource};
use crate::model::{
    canonicalize, AttrKind, GuardKind, PatternNode, PatternOp, RepetitionKind, RuleModel, SelectItem, WindowKind,
};
use crate::validator::{validate, Diagnostic};
use compile::{aggregate, AggSpec, CExpr, Compiler};
pub use oracle::oracle;
pub use value::Value;

/// One event as it appears in a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedEvent {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(default)]
    pub attrs: IndexMap<String, Value>,
}

impl TimedEvent {
    pub fn new(type_name: impl Into<String>, timestamp: i64) -> Self {
        Self {
            type_name: type_name.into(),
            timestamp,
            attrs: IndexMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.attrs.insert(name.into(), value.into());
        self
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub emitted_at: i64,
    /// Output columns in select-list order.
    pub values: IndexMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_event_name: Option<String>,
}

impl OutputRow {
    /// Equal up to a relative float tolerance.
    pub fn approx_eq(&self, other: &OutputRow, rel: f64) -> bool {
        self.emitted_at == other.emitted_at
            && self.derived_event_name == other.derived_event_name
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|((ka, va), (kb, vb))| ka == kb && va.approx_eq(vb, rel))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("model has {} validation finding(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("unsupported construct at {path}: {message}")]
    Unsupported { path: String, message: String },
    #[error("timestamp {timestamp} is earlier than {last}")]
    OutOfOrder { timestamp: i64, last: i64 },
    #[error("negative timestamp {0}")]
    NegativeTimestamp(i64),
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),
    #[error("{event}: {message}")]
    SchemaMismatch { event: String, message: String },
}

impl EngineError {
    /// True for errors caused by stream content rather than by the model.
    pub fn is_stream_error(&self) -> bool {
        !matches!(self, EngineError::Invalid(_) | EngineError::Unsupported { .. })
    }
}

/// An admitted event: schema-checked, values in declaration order.
#[derive(Debug)]
pub(crate) struct Ev {
    pub seq: u64,
    pub ts: i64,
    pub event: TimedEvent,
    pub vals: Vec<Value>,
}

/// Checks `raw` against the model's declarations. Integer values given for
/// float attributes are widened; `null` is accepted for any attribute.
pub(crate) fn conform(model: &RuleModel, raw: &TimedEvent, seq: u64) -> Result<Ev, EngineError> {
    if raw.timestamp < 0 {
        return Err(EngineError::NegativeTimestamp(raw.timestamp));
    }
    let decl = model
        .event(&raw.type_name)
        .ok_or_else(|| EngineError::UnknownEventType(raw.type_name.clone()))?;
    let mismatch = |message: String| EngineError::SchemaMismatch {
        event: raw.type_name.clone(),
        message,
    };
    if let Some(extra) = raw.attrs.keys().find(|k| decl.attribute(k).is_none()) {
        return Err(mismatch(format!("undeclared attribute {extra:?}")));
    }
    let mut vals = Vec::with_capacity(decl.attributes.len());
    let mut attrs = IndexMap::new();
    for a in &decl.attributes {
        let v = raw
            .attrs
            .get(&a.name)
            .ok_or_else(|| mismatch(format!("missing attribute {:?}", a.name)))?;
        let v = match (a.kind, v) {
            (_, Value::Null) => Value::Null,
            (AttrKind::Integer | AttrKind::Timestamp, Value::Int(_))
            | (AttrKind::Float, Value::Float(_))
            | (AttrKind::String, Value::Str(_))
            | (AttrKind::Boolean, Value::Bool(_)) => v.clone(),
            (AttrKind::Float, Value::Int(i)) => Value::Float(*i as f64),
            (kind, v) => return Err(mismatch(format!("attribute {:?} expects {kind:?}, got {v}", a.name))),
        };
        attrs.insert(a.name.clone(), v.clone());
        vals.push(v);
    }
    Ok(Ev {
        seq,
        ts: raw.timestamp,
        event: TimedEvent {
            type_name: raw.type_name.clone(),
            timestamp: raw.timestamp,
            attrs,
        },
        vals,
    })
}

fn unsupported(path: impl Into<String>, message: impl Into<String>) -> EngineError {
    EngineError::Unsupported {
        path: path.into(),
        message: message.into(),
    }
}

/// Validates the model, checks it against the engine subset and returns
/// its canonical form.
pub fn admit(model: &RuleModel) -> Result<RuleModel, EngineError> {
    let diags = validate(model);
    if !diags.is_empty() {
        return Err(EngineError::Invalid(diags));
    }
    if model.targets.len() > 3 {
        return Err(unsupported("targets[3]", "joins are limited to three targets"));
    }
    if let Some(p) = &model.pattern {
        if model.group_by.is_some() {
            return Err(unsupported("group_by", "pattern rules cannot group"));
        }
        for (i, item) in model.bring.iter().enumerate() {
            if let SelectItem::Column { expr, .. } = item {
                if expr.contains_aggregate() {
                    return Err(unsupported(format!("bring[{i}]"), "pattern rules cannot aggregate"));
                }
            }
        }
        for (i, t) in model.targets.iter().enumerate() {
            if t.window.is_some() || !t.group_win.is_empty() {
                return Err(unsupported(
                    format!("targets[{i}].window"),
                    "pattern leaves read the raw stream; windows do not apply",
                ));
            }
        }
        check_pattern(p, "pattern", false)?;
    }
    canonicalize(model).map_err(|e| unsupported("targets", e.to_string()))
}

/// Returns whether the node is infinite (contains `every`).
fn check_pattern(node: &PatternNode, path: &str, under_every: bool) -> Result<bool, EngineError> {
    if let Some(g) = &node.guard {
        if g.kind != GuardKind::WithIn {
            return Err(unsupported(
                format!("{path}.guard"),
                "only timer:within guards are executable",
            ));
        }
    }
    let every = match &node.repetition {
        None => false,
        Some(r) if r.kind == RepetitionKind::Every => {
            if under_every {
                return Err(unsupported(format!("{path}.repetition"), "every cannot be nested"));
            }
            true
        }
        Some(_) => {
            return Err(unsupported(
                format!("{path}.repetition"),
                "only every is executable; other repetitions are generation-only",
            ))
        }
    };
    let inner = under_every || every;
    let infinite = match &node.op {
        PatternOp::Event(_) => false,
        PatternOp::Not(_) => {
            return Err(unsupported(
                path.to_string(),
                "not is only executable as an operand of and",
            ))
        }
        PatternOp::And(cs) => {
            let p = format!("{path}.op.and");
            let mut any_inf = false;
            let mut positives = 0;
            for (i, c) in cs.iter().enumerate() {
                let cp = format!("{p}[{i}]");
                if let PatternOp::Not(leaf) = &c.op {
                    let plain = c.guard.is_none()
                        && c.repetition.is_none()
                        && leaf.guard.is_none()
                        && leaf.repetition.is_none()
                        && matches!(leaf.op, PatternOp::Event(_));
                    if !plain {
                        return Err(unsupported(cp, "not must wrap a plain event"));
                    }
                } else {
                    positives += 1;
                    any_inf |= check_pattern(c, &cp, inner)?;
                }
            }
            if positives == 0 {
                return Err(unsupported(p, "and needs at least one positive operand"));
            }
            any_inf
        }
        PatternOp::Or(cs) => {
            let p = format!("{path}.op.or");
            for (i, c) in cs.iter().enumerate() {
                if check_pattern(c, &format!("{p}[{i}]"), inner)? {
                    return Err(unsupported(format!("{p}[{i}]"), "or operands cannot repeat"));
                }
            }
            false
        }
        PatternOp::FollowedBy(cs) => {
            let p = format!("{path}.op.followed_by");
            let mut any_inf = false;
            for (i, c) in cs.iter().enumerate() {
                any_inf |= check_pattern(c, &format!("{p}[{i}]"), inner)?;
            }
            any_inf
        }
    };
    Ok(every || infinite)
}

struct Column {
    name: String,
    expr: CExpr,
}

struct Buffer {
    event: String,
    kind: WindowKind,
    ms: f64,
    count: usize,
    keys: Vec<usize>,
    parts: IndexMap<String, VecDeque<Arc<Ev>>>,
}

impl Buffer {
    fn evict(&mut self, now: i64) {
        if self.kind != WindowKind::Timer {
            return;
        }
        for part in self.parts.values_mut() {
            while part.front().is_some_and(|e| (now - e.ts) as f64 >= self.ms) {
                part.pop_front();
            }
        }
    }

    fn insert(&mut self, ev: &Arc<Ev>) {
        let key = partition_key(ev, &self.keys);
        let part = self.parts.entry(key).or_default();
        part.push_back(ev.clone());
        if self.kind == WindowKind::Counter {
            while part.len() > self.count {
                part.pop_front();
            }
        }
    }

    fn contents(&self) -> Vec<Arc<Ev>> {
        let mut all: Vec<Arc<Ev>> = self.parts.values().flatten().cloned().collect();
        all.sort_by_key(|e| e.seq);
        all
    }
}

pub(crate) fn partition_key(ev: &Ev, keys: &[usize]) -> String {
    let vals: Vec<&Value> = keys.iter().map(|&k| &ev.vals[k]).collect();
    serde_json::to_string(&vals).unwrap_or_default()
}

struct StreamPlan {
    buffers: Vec<Buffer>,
    condition: Option<CExpr>,
    aggs: Vec<AggSpec>,
    keys: Option<Vec<CExpr>>,
    /// Aggregates present and no bare attribute outside them.
    collapsed: bool,
}

struct PatternPlan {
    runtime: pattern::Runtime,
    condition: Option<CExpr>,
}

enum Plan {
    Stream(StreamPlan),
    Pattern(PatternPlan),
}

/// Running state of one rule. Pushes must be serialized by the caller.
pub struct Session {
    model: RuleModel,
    columns: Vec<Column>,
    plan: Plan,
    seq: u64,
    now: Option<i64>,
}

pub fn open_session(model: &RuleModel) -> Result<Session, EngineError> {
    let model = admit(model)?;
    let (columns, plan) = match &model.pattern {
        Some(p) => {
            let compiled = pattern::compile(&model, p);
            let scope = compiled.tags.iter().map(|(t, s, e)| (t.clone(), *s, e)).collect();
            let mut c = Compiler::new(scope);
            let columns = compile_columns(&model, &mut c, |alias| {
                compiled.tags.iter().find(|(t, _, _)| t == alias).map(|(_, s, _)| *s)
            });
            let condition = model.condition.as_ref().map(|e| c.expr(e));
            let runtime = pattern::Runtime::new(&compiled);
            (columns, Plan::Pattern(PatternPlan { runtime, condition }))
        }
        None => {
            let mut c = Compiler::for_targets(&model);
            let columns = compile_columns(&model, &mut c, |alias| model.target(alias).map(|(i, _)| i));
            let condition = model.condition.as_ref().map(|e| c.expr(e));
            let keys = model
                .group_by
                .as_ref()
                .map(|g| g.keys.iter().map(|k| c.attr(k)).collect());
            let has_aggs = !c.aggs.is_empty();
            let collapsed = has_aggs
                && model.bring.iter().all(|item| match item {
                    SelectItem::Star => false,
                    SelectItem::Column { expr, .. } => expr.free_attrs().is_empty(),
                });
            let buffers = model
                .targets
                .iter()
                .map(|t| {
                    let ev = model.event(&t.event_name).expect("validated");
                    let w = t.window.as_ref();
                    Buffer {
                        event: t.event_name.clone(),
                        kind: w.map_or(WindowKind::KeepAll, |w| w.kind),
                        ms: w.and_then(|w| w.seconds).unwrap_or(0.0) * 1000.0,
                        count: w.and_then(|w| w.count).unwrap_or(0).max(0) as usize,
                        keys: t
                            .group_win
                            .iter()
                            .filter_map(|k| ev.attributes.iter().position(|a| &a.name == k))
                            .collect(),
                        parts: IndexMap::new(),
                    }
                })
                .collect();
            let plan = StreamPlan {
                buffers,
                condition,
                aggs: c.aggs,
                keys,
                collapsed,
            };
            (columns, Plan::Stream(plan))
        }
    };
    Ok(Session {
        model,
        columns,
        plan,
        seq: 0,
        now: None,
    })
}

fn compile_columns(model: &RuleModel, c: &mut Compiler<'_>, slot_of: impl Fn(&str) -> Option<usize>) -> Vec<Column> {
    output_columns(model)
        .into_iter()
        .map(|col| {
            let expr = match &col.source {
                ColumnSource::Attr(r) => match slot_of(&r.alias) {
                    Some(_) => c.attr(r),
                    None => CExpr::Lit(Value::Null),
                },
                ColumnSource::Expr(op) => c.operand(op),
            };
            Column { name: col.name, expr }
        })
        .collect()
}

type Row = Vec<Option<Arc<Ev>>>;

fn seq_key(row: &Row) -> Vec<Option<u64>> {
    row.iter().map(|e| e.as_ref().map(|e| e.seq)).collect()
}

/// Cartesian product of `lists` in lexicographic order.
fn product(lists: &[Vec<Arc<Ev>>]) -> Vec<Row> {
    let mut rows: Vec<Row> = vec![Vec::new()];
    for list in lists {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                list.iter().map(move |e| {
                    let mut r = r.clone();
                    r.push(Some(e.clone()));
                    r
                })
            })
            .collect();
    }
    rows
}

impl Session {
    /// The canonical model the session runs.
    pub fn model(&self) -> &RuleModel {
        &self.model
    }

    /// Timestamp of the latest push or [`Session::advance_to`].
    pub fn now(&self) -> Option<i64> {
        self.now
    }

    /// Events currently retained for target `i`, oldest first. Pattern
    /// rules retain nothing.
    pub fn window_contents(&self, i: usize) -> Vec<TimedEvent> {
        match &self.plan {
            Plan::Stream(s) => s
                .buffers
                .get(i)
                .map_or_else(Vec::new, |b| b.contents().iter().map(|e| e.event.clone()).collect()),
            Plan::Pattern(_) => Vec::new(),
        }
    }

    /// Per-key sub-windows of target `i`, in order of first key appearance.
    pub fn window_partitions(&self, i: usize) -> Vec<Vec<TimedEvent>> {
        match &self.plan {
            Plan::Stream(s) => s.buffers.get(i).map_or_else(Vec::new, |b| {
                b.parts
                    .values()
                    .map(|p| p.iter().map(|e| e.event.clone()).collect())
                    .collect()
            }),
            Plan::Pattern(_) => Vec::new(),
        }
    }

    fn advance(&mut self, ts: i64) -> Result<(), EngineError> {
        if ts < 0 {
            return Err(EngineError::NegativeTimestamp(ts));
        }
        if let Some(last) = self.now {
            if ts < last {
                return Err(EngineError::OutOfOrder { timestamp: ts, last });
            }
        }
        Ok(())
    }

    /// Moves the clock forward without an event, evicting expired entries.
    pub fn advance_to(&mut self, ts: i64) -> Result<(), EngineError> {
        self.advance(ts)?;
        self.now = Some(ts);
        if let Plan::Stream(s) = &mut self.plan {
            s.buffers.iter_mut().for_each(|b| b.evict(ts));
        }
        Ok(())
    }

    pub fn push(&mut self, raw: &TimedEvent) -> Result<Vec<OutputRow>, EngineError> {
        self.advance(raw.timestamp)?;
        let ev = Arc::new(conform(&self.model, raw, self.seq)?);
        self.seq += 1;
        self.now = Some(ev.ts);
        if let Plan::Pattern(p) = &mut self.plan {
            let matches = p.runtime.push(&ev);
            let Plan::Pattern(p) = &self.plan else { unreachable!() };
            return Ok(matches
                .into_iter()
                .filter(|b| p.condition.as_ref().is_none_or(|c| c.holds(b)))
                .map(|b| self.project(ev.ts, &b, &[]))
                .collect());
        }
        if let Plan::Stream(s) = &mut self.plan {
            for b in &mut s.buffers {
                b.evict(ev.ts);
            }
            for b in &mut s.buffers {
                if b.event == ev.event.type_name {
                    b.insert(&ev);
                }
            }
        }
        Ok(self.stream_rows(&ev))
    }

    fn project(&self, at: i64, row: &Row, aggs: &[Value]) -> OutputRow {
        OutputRow {
            emitted_at: at,
            values: self
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.expr.eval(row, aggs)))
                .collect(),
            derived_event_name: self.model.output.as_ref().map(|o| o.name.clone()),
        }
    }

    fn stream_rows(&self, ev: &Arc<Ev>) -> Vec<OutputRow> {
        let Plan::Stream(s) = &self.plan else {
            return Vec::new();
        };
        let contents: Vec<Vec<Arc<Ev>>> = s.buffers.iter().map(Buffer::contents).collect();
        let passes = |r: &Row| s.condition.as_ref().is_none_or(|c| c.holds(r));

        // rows holding the new event; the first position it fills decides
        // which product enumerates the row
        let mut fresh = Vec::new();
        for (p, b) in s.buffers.iter().enumerate() {
            if b.event != ev.event.type_name {
                continue;
            }
            let lists: Vec<Vec<Arc<Ev>>> = contents
                .iter()
                .enumerate()
                .map(|(j, list)| {
                    if j == p {
                        vec![ev.clone()]
                    } else if j < p && s.buffers[j].event == ev.event.type_name {
                        list.iter().filter(|e| e.seq != ev.seq).cloned().collect()
                    } else {
                        list.clone()
                    }
                })
                .collect();
            fresh.extend(product(&lists));
        }
        fresh.retain(|r| passes(r));
        fresh.sort_by_cached_key(seq_key);
        if fresh.is_empty() {
            return Vec::new();
        }

        if s.aggs.is_empty() && s.keys.is_none() {
            return fresh.iter().map(|r| self.project(ev.ts, r, &[])).collect();
        }
        let mut all = product(&contents);
        all.retain(|r| passes(r));
        self.aggregate_rows(ev.ts, s, &fresh, &all)
    }

    /// Output for rows `trigger` given the full passing join `all`.
    fn aggregate_rows(&self, at: i64, s: &StreamPlan, trigger: &[Row], all: &[Row]) -> Vec<OutputRow> {
        match &s.keys {
            Some(keys) => {
                let key_of = |r: &Row| {
                    let vals: Vec<Value> = keys.iter().map(|k| k.eval(r, &[])).collect();
                    serde_json::to_string(&vals).unwrap_or_default()
                };
                let mut seen = Vec::new();
                let mut out = Vec::new();
                for r in trigger {
                    let key = key_of(r);
                    if seen.contains(&key) {
                        continue;
                    }
                    let members: Vec<&Row> = all.iter().filter(|w| key_of(w) == key).collect();
                    let aggs = aggregate(&s.aggs, members.iter().copied());
                    out.push(self.project(at, r, &aggs));
                    seen.push(key);
                }
                out
            }
            None => {
                let aggs = aggregate(&s.aggs, all.iter());
                if s.collapsed {
                    let row = trigger.first().cloned().unwrap_or_else(|| vec![None; s.buffers.len()]);
                    vec![self.project(at, &row, &aggs)]
                } else {
                    trigger.iter().map(|r| self.project(at, r, &aggs)).collect()
                }
            }
        }
    }

    /// Current result of the rule over the retained windows, as a pull
    /// query would see it at [`Session::now`]. A purely aggregating rule
    /// always yields one row, so empty windows show `null` aggregates and
    /// zero counts. Pattern rules yield nothing.
    pub fn snapshot(&self) -> Vec<OutputRow> {
        let Plan::Stream(s) = &self.plan else {
            return Vec::new();
        };
        let at = self.now.unwrap_or(0);
        let contents: Vec<Vec<Arc<Ev>>> = s.buffers.iter().map(Buffer::contents).collect();
        let mut all = product(&contents);
        all.retain(|r| s.condition.as_ref().is_none_or(|c| c.holds(r)));
        if s.aggs.is_empty() && s.keys.is_none() {
            return all.iter().map(|r| self.project(at, r, &[])).collect();
        }
        if s.collapsed && s.keys.is_none() {
            return self.aggregate_rows(at, s, &[], &all);
        }
        self.aggregate_rows(at, s, &all, &all)
    }
}

/// Pushes `events` through a fresh session and concatenates the outputs.
pub fn run_stream(model: &RuleModel, events: &[TimedEvent]) -> Result<Vec<OutputRow>, EngineError> {
    let mut session = open_session(model)?;
    let mut out = Vec::new();
    for ev in events {
        out.extend(session.push(ev)?);
    }
    Ok(out)
}
