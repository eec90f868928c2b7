//! Expressions resolved to slot/attribute indices for the engine hot path.

use std::sync::Arc;

use super::value::{self, Accumulator, Value};
use super::Ev;
use crate::model::{
    AggCall, AggFn, ArithOp, AttrRef, CompareOp, EventType, Expression, LogicalOp, Operand, RuleModel, ScalarFn,
};

pub(crate) type Row = [Option<Arc<Ev>>];

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Attr(usize, usize),
    Lit(Value),
    Agg(usize),
    Scalar(ScalarFn, Box<CExpr>, Box<CExpr>),
    Arith(ArithOp, Box<CExpr>, Box<CExpr>),
    Cmp(CompareOp, Box<CExpr>, Box<CExpr>),
    And(Vec<CExpr>),
    Or(Vec<CExpr>),
    Not(Box<CExpr>),
}

impl CExpr {
    pub(crate) fn eval(&self, row: &Row, aggs: &[Value]) -> Value {
        match self {
            CExpr::Attr(slot, attr) => row[*slot].as_ref().map_or(Value::Null, |ev| ev.vals[*attr].clone()),
            CExpr::Lit(v) => v.clone(),
            CExpr::Agg(i) => aggs.get(*i).cloned().unwrap_or(Value::Null),
            CExpr::Scalar(f, a, b) => value::scalar(*f, &a.eval(row, aggs), &b.eval(row, aggs)),
            CExpr::Arith(op, a, b) => value::arith(*op, &a.eval(row, aggs), &b.eval(row, aggs)),
            CExpr::Cmp(op, a, b) => value::compare(*op, &a.eval(row, aggs), &b.eval(row, aggs)),
            CExpr::And(cs) => value::and(cs.iter().map(|c| c.eval(row, aggs))),
            CExpr::Or(cs) => value::or(cs.iter().map(|c| c.eval(row, aggs))),
            CExpr::Not(c) => value::not(&c.eval(row, aggs)),
        }
    }

    /// Only a definite `true` passes.
    pub(crate) fn holds(&self, row: &Row) -> bool {
        self.eval(row, &[]) == Value::Bool(true)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AggSpec {
    func: AggFn,
    arg: Option<CExpr>,
}

/// Evaluates every aggregate over `rows`.
pub(crate) fn aggregate<'r>(
    specs: &[AggSpec],
    rows: impl Iterator<Item = &'r Vec<Option<Arc<Ev>>>> + Clone,
) -> Vec<Value> {
    specs
        .iter()
        .map(|spec| {
            let mut acc = Accumulator::new(spec.func);
            for row in rows.clone() {
                match &spec.arg {
                    None => acc.push_row(),
                    Some(e) => acc.push(&e.eval(row, &[])),
                }
            }
            acc.finish()
        })
        .collect()
}

pub(crate) struct Compiler<'m> {
    scope: Vec<(String, usize, &'m EventType)>,
    calls: Vec<AggCall>,
    pub(crate) aggs: Vec<AggSpec>,
}

impl<'m> Compiler<'m> {
    pub(crate) fn new(scope: Vec<(String, usize, &'m EventType)>) -> Self {
        Self {
            scope,
            calls: Vec::new(),
            aggs: Vec::new(),
        }
    }

    /// Target aliases mapped to target positions.
    pub(crate) fn for_targets(model: &'m RuleModel) -> Self {
        let scope = model
            .targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| Some((t.effective_alias(), i, model.event(&t.event_name)?)))
            .collect();
        Self::new(scope)
    }

    pub(crate) fn with(mut self, name: &str, slot: usize, event: &'m EventType) -> Self {
        self.scope.insert(0, (name.to_string(), slot, event));
        self
    }

    pub(crate) fn attr(&self, r: &AttrRef) -> CExpr {
        self.scope
            .iter()
            .find(|(a, _, _)| *a == r.alias)
            .and_then(|(_, slot, ev)| {
                let idx = ev.attributes.iter().position(|a| a.name == r.name)?;
                Some(CExpr::Attr(*slot, idx))
            })
            .unwrap_or(CExpr::Lit(Value::Null))
    }

    pub(crate) fn operand(&mut self, op: &Operand) -> CExpr {
        match op {
            Operand::Attr(r) => self.attr(r),
            Operand::Literal(l) => CExpr::Lit(Value::from_literal(l)),
            Operand::Agg(call) => {
                let idx = match self.calls.iter().position(|c| c == call) {
                    Some(i) => i,
                    None => {
                        let arg = call.target.as_ref().map(|r| self.attr(r));
                        self.calls.push(call.clone());
                        self.aggs.push(AggSpec { func: call.func, arg });
                        self.calls.len() - 1
                    }
                };
                CExpr::Agg(idx)
            }
            Operand::Scalar(call) => {
                let mut args = call.args.iter().map(|a| self.operand(a));
                let a = args.next().unwrap_or(CExpr::Lit(Value::Null));
                let b = args.next().unwrap_or(CExpr::Lit(Value::Null));
                CExpr::Scalar(call.func, Box::new(a), Box::new(b))
            }
            Operand::Arith(a) => CExpr::Arith(a.op, Box::new(self.operand(&a.lhs)), Box::new(self.operand(&a.rhs))),
        }
    }

    pub(crate) fn expr(&mut self, e: &Expression) -> CExpr {
        match e {
            Expression::Compare(c) => CExpr::Cmp(c.op, Box::new(self.operand(&c.lhs)), Box::new(self.operand(&c.rhs))),
            Expression::Logical(l) => {
                let mut cs: Vec<CExpr> = l.children.iter().map(|c| self.expr(c)).collect();
                match l.op {
                    LogicalOp::And => CExpr::And(cs),
                    LogicalOp::Or => CExpr::Or(cs),
                    LogicalOp::Not => CExpr::Not(Box::new(cs.pop().unwrap_or(CExpr::Lit(Value::Null)))),
                }
            }
            Expression::Arith(a) => CExpr::Arith(a.op, Box::new(self.operand(&a.lhs)), Box::new(self.operand(&a.rhs))),
        }
    }
}
