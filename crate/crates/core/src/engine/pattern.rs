//! Incremental pattern matching.
//!
//! Each event leaf owns a slot; a binding maps slots to the events they
//! consumed. A finite node runs as a single [`Fin`] instance that either
//! completes, dies or stays pending. Nodes containing `every` are infinite
//! and produce a stream of matches.
//!
//! Resolution at one event is ordered by phase: guard expiry (0) beats
//! completion (1) beats a negated event (2).

use std::sync::Arc;

use super::compile::{CExpr, Compiler};
use super::Ev;
use crate::model::{EventType, GuardKind, PatternNode, PatternOp, RepetitionKind, RuleModel};

pub(crate) type Bind = Vec<Option<Arc<Ev>>>;

pub(crate) struct Leaf {
    slot: usize,
    event: String,
    filter: Option<CExpr>,
}

impl Leaf {
    fn accepts(&self, ev: &Arc<Ev>, ctx: &Bind) -> bool {
        if ev.event.type_name != self.event {
            return false;
        }
        let Some(filter) = &self.filter else {
            return true;
        };
        let mut row = ctx.clone();
        row[self.slot] = Some(ev.clone());
        filter.holds(&row)
    }
}

pub(crate) struct Pat {
    op: POp,
    guard_ms: Option<f64>,
    every: bool,
    infinite: bool,
}

enum POp {
    Leaf(Arc<Leaf>),
    And { pos: Vec<Arc<Pat>>, neg: Vec<Arc<Leaf>> },
    Or(Vec<Arc<Pat>>),
    Seq(Arc<[Arc<Pat>]>),
}

/// Compiled pattern plus the slot layout shared with output projection.
pub(crate) struct Compiled {
    pub root: Arc<Pat>,
    pub slots: usize,
    /// (tag, slot, event type) for every tagged leaf.
    pub tags: Vec<(String, usize, EventType)>,
}

pub(crate) fn compile(model: &RuleModel, root: &PatternNode) -> Compiled {
    let leaves = root.leaves();
    let mut tags = Vec::new();
    for (slot, leaf) in leaves.iter().enumerate() {
        if let (Some(tag), Some(ev)) = (&leaf.tag, model.scope_event(&leaf.alias)) {
            tags.push((tag.clone(), slot, ev.clone()));
        }
    }
    let mut next = 0;
    let root = build(model, root, &tags, &mut next);
    Compiled {
        root,
        slots: leaves.len(),
        tags,
    }
}

fn build(model: &RuleModel, node: &PatternNode, tags: &[(String, usize, EventType)], next: &mut usize) -> Arc<Pat> {
    let op = match &node.op {
        PatternOp::Event(_) => POp::Leaf(leaf(model, node, tags, next)),
        PatternOp::Not(_) => unreachable!("negation only appears inside and"),
        PatternOp::And(cs) => {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for c in cs {
                match &c.op {
                    PatternOp::Not(inner) => neg.push(leaf(model, inner, tags, next)),
                    _ => pos.push(build(model, c, tags, next)),
                }
            }
            POp::And { pos, neg }
        }
        PatternOp::Or(cs) => POp::Or(cs.iter().map(|c| build(model, c, tags, next)).collect()),
        PatternOp::FollowedBy(cs) => POp::Seq(cs.iter().map(|c| build(model, c, tags, next)).collect()),
    };
    let every = node
        .repetition
        .as_ref()
        .is_some_and(|r| r.kind == RepetitionKind::Every);
    let infinite = every
        || match &op {
            POp::Leaf(_) => false,
            POp::And { pos, .. } => pos.iter().any(|p| p.infinite),
            POp::Or(cs) => cs.iter().any(|p| p.infinite),
            POp::Seq(cs) => cs.iter().any(|p| p.infinite),
        };
    let guard_ms = node
        .guard
        .as_ref()
        .filter(|g| g.kind == GuardKind::WithIn)
        .map(|g| g.seconds * 1000.0);
    Arc::new(Pat {
        op,
        guard_ms,
        every,
        infinite,
    })
}

fn leaf(model: &RuleModel, node: &PatternNode, tags: &[(String, usize, EventType)], next: &mut usize) -> Arc<Leaf> {
    let PatternOp::Event(r) = &node.op else {
        unreachable!("negated operand is a plain event")
    };
    let slot = *next;
    *next += 1;
    let event = model
        .target(&r.alias)
        .map(|(_, t)| t.event_name.clone())
        .unwrap_or_default();
    let filter = r.filter.as_ref().map(|f| {
        let scope = tags.iter().map(|(t, s, e)| (t.clone(), *s, e)).collect();
        let mut c = Compiler::new(scope);
        if let Some(ev) = model.event(&event) {
            c = c.with(&r.alias, slot, ev);
            if let Some(tag) = &r.tag {
                c = c.with(tag, slot, ev);
            }
        }
        c.expr(f)
    });
    Arc::new(Leaf { slot, event, filter })
}

fn merge(into: &mut Bind, from: &Bind) {
    for (a, b) in into.iter_mut().zip(from) {
        if b.is_some() {
            *a = b.clone();
        }
    }
}

fn merged(a: &Bind, b: &Bind) -> Bind {
    let mut out = a.clone();
    merge(&mut out, b);
    out
}

enum Res {
    Complete(Bind),
    Dead { phase: u8, restart: u64 },
}

/// One attempt at a finite node.
struct Fin {
    node: Arc<Pat>,
    ctx: Bind,
    first: Option<i64>,
    state: FinState,
}

enum FinState {
    Leaf(Arc<Leaf>),
    Seq {
        stages: Arc<[Arc<Pat>]>,
        stage: usize,
        cur: Box<Fin>,
        acc: Bind,
    },
    And {
        kids: Vec<Option<Fin>>,
        done: Vec<Option<Bind>>,
        neg: Vec<Arc<Leaf>>,
    },
    Or {
        kids: Vec<Option<Fin>>,
        deaths: Vec<Option<(u64, u8, u64)>>,
    },
}

impl Fin {
    fn new(node: &Arc<Pat>, ctx: Bind) -> Fin {
        let state = match &node.op {
            POp::Leaf(l) => FinState::Leaf(l.clone()),
            POp::Seq(stages) => FinState::Seq {
                stages: stages.clone(),
                stage: 0,
                cur: Box::new(Fin::new(&stages[0], ctx.clone())),
                acc: vec![None; ctx.len()],
            },
            POp::And { pos, neg } => FinState::And {
                kids: pos.iter().map(|p| Some(Fin::new(p, ctx.clone()))).collect(),
                done: vec![None; pos.len()],
                neg: neg.clone(),
            },
            POp::Or(cs) => FinState::Or {
                kids: cs.iter().map(|p| Some(Fin::new(p, ctx.clone()))).collect(),
                deaths: vec![None; cs.len()],
            },
        };
        Fin {
            node: node.clone(),
            ctx,
            first: None,
            state,
        }
    }

    /// Offers one event. Returns the resolution, if any, and whether some
    /// leaf consumed the event.
    fn feed(&mut self, ev: &Arc<Ev>) -> (Option<Res>, bool) {
        if let (Some(ms), Some(first)) = (self.node.guard_ms, self.first) {
            if (ev.ts - first) as f64 >= ms {
                return (
                    Some(Res::Dead {
                        phase: 0,
                        restart: ev.seq,
                    }),
                    false,
                );
            }
        }
        let (res, consumed) = self.feed_op(ev);
        if consumed && self.first.is_none() {
            self.first = Some(ev.ts);
        }
        (res, consumed)
    }

    fn feed_op(&mut self, ev: &Arc<Ev>) -> (Option<Res>, bool) {
        match &mut self.state {
            FinState::Leaf(l) => {
                if l.accepts(ev, &self.ctx) {
                    let mut b = vec![None; self.ctx.len()];
                    b[l.slot] = Some(ev.clone());
                    (Some(Res::Complete(b)), true)
                } else {
                    (None, false)
                }
            }
            FinState::Seq {
                stages,
                stage,
                cur,
                acc,
            } => {
                let (res, consumed) = cur.feed(ev);
                let res = match res {
                    Some(Res::Complete(b)) => {
                        merge(acc, &b);
                        if *stage + 1 == stages.len() {
                            Some(Res::Complete(acc.clone()))
                        } else {
                            *stage += 1;
                            **cur = Fin::new(&stages[*stage], merged(&self.ctx, acc));
                            None
                        }
                    }
                    other => other,
                };
                (res, consumed)
            }
            FinState::And { kids, done, neg } => {
                let mut consumed = false;
                // (phase, restart); restart None means completion
                let mut best: Option<(u8, Option<u64>)> = None;
                let mut consider = |phase: u8, restart: Option<u64>| {
                    if best.is_none_or(|(p, _)| phase < p) {
                        best = Some((phase, restart));
                    }
                };
                for (k, slot) in kids.iter_mut().enumerate() {
                    let Some(kid) = slot else { continue };
                    let (res, c) = kid.feed(ev);
                    consumed |= c;
                    match res {
                        Some(Res::Complete(b)) => {
                            done[k] = Some(b);
                            *slot = None;
                        }
                        Some(Res::Dead { phase, restart }) => {
                            consider(phase, Some(restart));
                            *slot = None;
                        }
                        None => {}
                    }
                }
                if neg.iter().any(|l| l.accepts(ev, &self.ctx)) {
                    consider(2, Some(ev.seq + 1));
                }
                if done.iter().all(Option::is_some) {
                    consider(1, None);
                }
                let res = best.map(|(phase, restart)| match restart {
                    Some(restart) => Res::Dead { phase, restart },
                    None => {
                        let mut b = vec![None; self.ctx.len()];
                        for d in done.iter().flatten() {
                            merge(&mut b, d);
                        }
                        Res::Complete(b)
                    }
                });
                (res, consumed)
            }
            FinState::Or { kids, deaths } => {
                let mut consumed = false;
                let mut winner = None;
                for (k, slot) in kids.iter_mut().enumerate() {
                    let Some(kid) = slot else { continue };
                    let (res, c) = kid.feed(ev);
                    consumed |= c;
                    match res {
                        Some(Res::Complete(b)) => {
                            if winner.is_none() {
                                winner = Some(b);
                            }
                            *slot = None;
                        }
                        Some(Res::Dead { phase, restart }) => {
                            deaths[k] = Some((ev.seq, phase, restart));
                            *slot = None;
                        }
                        None => {}
                    }
                }
                let res = match winner {
                    Some(b) => Some(Res::Complete(b)),
                    None if deaths.iter().all(Option::is_some) => deaths
                        .iter()
                        .flatten()
                        .max_by_key(|(idx, phase, _)| (*idx, *phase))
                        .map(|&(_, phase, restart)| Res::Dead { phase, restart }),
                    None => None,
                };
                (res, consumed)
            }
        }
    }
}

/// Running instance of any node.
enum Inst {
    Fin(Option<Fin>),
    Every { node: Arc<Pat>, ctx: Bind, cur: Fin },
    Seq(SeqInst),
    And(AndInst),
    Guarded { ms: f64, inner: Box<Inst> },
}

struct SeqInst {
    stages: Arc<[Arc<Pat>]>,
    from: usize,
    ctx: Bind,
    acc: Bind,
    head: Option<Box<Inst>>,
    tails: Vec<SeqInst>,
}

struct AndInst {
    kids: Vec<Inst>,
    seen: Vec<Vec<Bind>>,
    neg: Vec<Arc<Leaf>>,
    ctx: Bind,
    dead: bool,
}

impl Inst {
    fn new(node: &Arc<Pat>, ctx: Bind) -> Inst {
        if node.every {
            return Inst::Every {
                node: node.clone(),
                cur: Fin::new(node, ctx.clone()),
                ctx,
            };
        }
        if !node.infinite {
            return Inst::Fin(Some(Fin::new(node, ctx)));
        }
        let inst = match &node.op {
            POp::Seq(stages) => Inst::Seq(SeqInst::new(stages.clone(), 0, ctx.clone(), vec![None; ctx.len()])),
            POp::And { pos, neg } => Inst::And(AndInst {
                kids: pos.iter().map(|p| Inst::new(p, ctx.clone())).collect(),
                seen: vec![Vec::new(); pos.len()],
                neg: neg.clone(),
                ctx,
                dead: false,
            }),
            POp::Leaf(_) | POp::Or(_) => unreachable!("leaves and or-nodes are finite"),
        };
        match node.guard_ms {
            Some(ms) => Inst::Guarded {
                ms,
                inner: Box::new(inst),
            },
            None => inst,
        }
    }

    fn finished(&self) -> bool {
        match self {
            Inst::Fin(f) => f.is_none(),
            Inst::Every { .. } => false,
            Inst::Seq(s) => s.finished(),
            Inst::And(a) => a.dead,
            Inst::Guarded { inner, .. } => inner.finished(),
        }
    }

    /// Matches completed by `ev`.
    fn step(&mut self, ev: &Arc<Ev>) -> Vec<Bind> {
        match self {
            Inst::Fin(slot) => {
                let Some(fin) = slot else { return Vec::new() };
                match fin.feed(ev).0 {
                    Some(Res::Complete(b)) => {
                        *slot = None;
                        vec![b]
                    }
                    Some(Res::Dead { .. }) => {
                        *slot = None;
                        Vec::new()
                    }
                    None => Vec::new(),
                }
            }
            Inst::Every { node, ctx, cur } => {
                let mut out = Vec::new();
                loop {
                    match cur.feed(ev).0 {
                        None => break,
                        Some(Res::Complete(b)) => {
                            out.push(b);
                            *cur = Fin::new(node, ctx.clone());
                            break;
                        }
                        Some(Res::Dead { restart, .. }) => {
                            *cur = Fin::new(node, ctx.clone());
                            if restart != ev.seq {
                                break;
                            }
                        }
                    }
                }
                out
            }
            Inst::Seq(s) => s.step(ev),
            Inst::And(a) => a.step(ev),
            Inst::Guarded { ms, inner } => {
                let ms = *ms;
                let mut out = inner.step(ev);
                out.retain(|b| {
                    let first = b.iter().flatten().map(|e| e.ts).min().unwrap_or(ev.ts);
                    ((ev.ts - first) as f64) < ms
                });
                out
            }
        }
    }
}

impl SeqInst {
    fn new(stages: Arc<[Arc<Pat>]>, from: usize, ctx: Bind, acc: Bind) -> SeqInst {
        let head = Inst::new(&stages[from], merged(&ctx, &acc));
        SeqInst {
            stages,
            from,
            ctx,
            acc,
            head: Some(Box::new(head)),
            tails: Vec::new(),
        }
    }

    fn finished(&self) -> bool {
        self.head.is_none() && self.tails.is_empty()
    }

    fn step(&mut self, ev: &Arc<Ev>) -> Vec<Bind> {
        let mut out = Vec::new();
        for t in &mut self.tails {
            out.extend(t.step(ev));
        }
        self.tails.retain(|t| !t.finished());
        if let Some(head) = &mut self.head {
            for b in head.step(ev) {
                let acc = merged(&self.acc, &b);
                if self.from + 1 == self.stages.len() {
                    out.push(acc);
                } else {
                    self.tails
                        .push(SeqInst::new(self.stages.clone(), self.from + 1, self.ctx.clone(), acc));
                }
            }
            if head.finished() {
                self.head = None;
            }
        }
        out
    }
}

impl AndInst {
    fn step(&mut self, ev: &Arc<Ev>) -> Vec<Bind> {
        if self.dead {
            return Vec::new();
        }
        let fresh: Vec<Vec<Bind>> = self
            .kids
            .iter_mut()
            .map(|k| if k.finished() { Vec::new() } else { k.step(ev) })
            .collect();
        let n = self.kids.len();
        let mut out = Vec::new();
        // each combination counted once, by its first fresh component
        for c in 0..n {
            if fresh[c].is_empty() {
                continue;
            }
            let mut partial: Vec<Bind> = vec![vec![None; self.ctx.len()]];
            for j in 0..n {
                let choices: Vec<&Bind> = if j < c {
                    self.seen[j].iter().collect()
                } else if j == c {
                    fresh[c].iter().collect()
                } else {
                    self.seen[j].iter().chain(&fresh[j]).collect()
                };
                partial = partial
                    .iter()
                    .flat_map(|p| choices.iter().map(move |b| merged(p, b)))
                    .collect();
                if partial.is_empty() {
                    break;
                }
            }
            out.extend(partial);
        }
        for (seen, new) in self.seen.iter_mut().zip(fresh) {
            seen.extend(new);
        }
        let starved = self
            .kids
            .iter()
            .zip(&self.seen)
            .any(|(k, s)| k.finished() && s.is_empty());
        if starved || self.neg.iter().any(|l| l.accepts(ev, &self.ctx)) {
            self.dead = true;
        }
        out
    }
}

/// Pattern state of a session.
pub(crate) struct Runtime {
    root: Inst,
}

impl Runtime {
    pub(crate) fn new(compiled: &Compiled) -> Runtime {
        Runtime {
            root: Inst::new(&compiled.root, vec![None; compiled.slots]),
        }
    }

    /// Matches completed by `ev`, ordered by the consumed sequence numbers
    /// of the leaves in declaration order.
    pub(crate) fn push(&mut self, ev: &Arc<Ev>) -> Vec<Bind> {
        let mut out = self.root.step(ev);
        out.sort_by_cached_key(|b| b.iter().map(|e| e.as_ref().map(|e| e.seq)).collect::<Vec<_>>());
        out
    }
}
