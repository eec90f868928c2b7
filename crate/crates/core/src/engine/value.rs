use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AggFn, ArithOp, CompareOp, Literal, ScalarFn};

/// A runtime attribute or expression value. `Null` stands for an unknown
/// value (missing binding, division by zero, aggregate over nothing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Int(v) => Value::Int(*v),
            Literal::Float(v) => Value::Float(*v),
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// `Some(b)` for booleans, `None` for everything else.
    pub fn truth(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Equality with a relative tolerance on floats. Variants must agree.
    pub fn approx_eq(&self, other: &Value, rel: f64) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => {
                a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= rel * a.abs().max(b.abs())
            }
            _ => self == other,
        }
    }

    fn order(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => self.as_f64()?.partial_cmp(&other.as_f64()?),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Three-valued comparison: `Null` when either side is unknown or the
/// operands are not comparable.
pub fn compare(op: CompareOp, a: &Value, b: &Value) -> Value {
    let Some(ord) = a.order(b) else {
        return Value::Null;
    };
    Value::Bool(match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    })
}

/// Integer arithmetic stays integral until it overflows; `/` always yields
/// a float and `x / 0` is `Null`.
pub fn arith(op: ArithOp, a: &Value, b: &Value) -> Value {
    if let (ArithOp::Div, Some(x), Some(y)) = (op, a.as_f64(), b.as_f64()) {
        return if y == 0.0 { Value::Null } else { Value::Float(x / y) };
    }
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let exact = match op {
            ArithOp::Add => x.checked_add(*y),
            ArithOp::Sub => x.checked_sub(*y),
            ArithOp::Mul => x.checked_mul(*y),
            ArithOp::Div => unreachable!(),
        };
        if let Some(v) = exact {
            return Value::Int(v);
        }
    }
    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
        return Value::Null;
    };
    Value::Float(match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => unreachable!(),
    })
}

/// Two-argument `max`/`min`. Mixed integer and float operands give a float.
pub fn scalar(f: ScalarFn, a: &Value, b: &Value) -> Value {
    let Some(ord) = a.order(b) else {
        return Value::Null;
    };
    let pick_a = match f {
        ScalarFn::Max2 => ord != Ordering::Less,
        ScalarFn::Min2 => ord != Ordering::Greater,
    };
    let chosen = if pick_a { a } else { b };
    match (a, b) {
        (Value::Int(_), Value::Int(_)) => chosen.clone(),
        _ => chosen.as_f64().map_or(Value::Null, Value::Float),
    }
}

/// Kleene conjunction.
pub fn and(values: impl IntoIterator<Item = Value>) -> Value {
    let mut unknown = false;
    for v in values {
        match v.truth() {
            Some(false) => return Value::Bool(false),
            Some(true) => {}
            None => unknown = true,
        }
    }
    if unknown {
        Value::Null
    } else {
        Value::Bool(true)
    }
}

/// Kleene disjunction.
pub fn or(values: impl IntoIterator<Item = Value>) -> Value {
    let mut unknown = false;
    for v in values {
        match v.truth() {
            Some(true) => return Value::Bool(true),
            Some(false) => {}
            None => unknown = true,
        }
    }
    if unknown {
        Value::Null
    } else {
        Value::Bool(false)
    }
}

pub fn not(v: &Value) -> Value {
    v.truth().map_or(Value::Null, |b| Value::Bool(!b))
}

/// Running state of one aggregate. Nulls are skipped; `count` with no
/// argument counts rows via [`Accumulator::push_row`].
#[derive(Debug, Clone)]
pub struct Accumulator {
    func: AggFn,
    count: i64,
    int_sum: Option<i64>,
    float_sum: f64,
    all_int: bool,
    best: Option<Value>,
}

impl Accumulator {
    pub fn new(func: AggFn) -> Self {
        Self {
            func,
            count: 0,
            int_sum: Some(0),
            float_sum: 0.0,
            all_int: true,
            best: None,
        }
    }

    pub fn push_row(&mut self) {
        self.count += 1;
    }

    pub fn push(&mut self, v: &Value) {
        if v.is_null() {
            return;
        }
        self.count += 1;
        match v {
            Value::Int(x) => {
                self.int_sum = self.int_sum.and_then(|s| s.checked_add(*x));
            }
            _ => self.all_int = false,
        }
        if let Some(x) = v.as_f64() {
            self.float_sum += x;
        }
        let better = match &self.best {
            None => true,
            Some(b) => matches!(
                (self.func, v.order(b)),
                (AggFn::Max, Some(Ordering::Greater)) | (AggFn::Min, Some(Ordering::Less))
            ),
        };
        if better {
            self.best = Some(v.clone());
        }
    }

    pub fn finish(&self) -> Value {
        let exact = if self.all_int { self.int_sum } else { None };
        match self.func {
            AggFn::Count => Value::Int(self.count),
            _ if self.count == 0 => Value::Null,
            AggFn::Sum => exact.map_or(Value::Float(self.float_sum), Value::Int),
            AggFn::Avg => {
                let total = exact.map_or(self.float_sum, |s| s as f64);
                Value::Float(total / self.count as f64)
            }
            AggFn::Max | AggFn::Min => self.best.clone().unwrap_or(Value::Null),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_are_three_valued() {
        assert_eq!(
            compare(CompareOp::Ge, &Value::Float(250.0), &Value::Int(200)),
            Value::Bool(true)
        );
        assert_eq!(compare(CompareOp::Eq, &Value::Null, &Value::Int(1)), Value::Null);
        assert_eq!(and([Value::Bool(false), Value::Null]), Value::Bool(false));
        assert_eq!(and([Value::Bool(true), Value::Null]), Value::Null);
        assert_eq!(or([Value::Bool(true), Value::Null]), Value::Bool(true));
        assert_eq!(not(&Value::Null), Value::Null);
    }

    #[test]
    fn arithmetic() {
        assert_eq!(arith(ArithOp::Add, &Value::Int(2), &Value::Int(3)), Value::Int(5));
        assert_eq!(arith(ArithOp::Div, &Value::Int(3), &Value::Int(2)), Value::Float(1.5));
        assert_eq!(arith(ArithOp::Div, &Value::Int(3), &Value::Int(0)), Value::Null);
        assert_eq!(
            arith(ArithOp::Mul, &Value::Int(i64::MAX), &Value::Int(2)),
            Value::Float(i64::MAX as f64 * 2.0)
        );
        assert_eq!(
            scalar(ScalarFn::Max2, &Value::Int(2), &Value::Float(1.5)),
            Value::Float(2.0)
        );
    }

    #[test]
    fn empty_aggregates() {
        for f in [AggFn::Avg, AggFn::Sum, AggFn::Min, AggFn::Max] {
            assert_eq!(Accumulator::new(f).finish(), Value::Null);
        }
        assert_eq!(Accumulator::new(AggFn::Count).finish(), Value::Int(0));
    }

    #[test]
    fn sums_fall_back_to_float_on_overflow() {
        let mut acc = Accumulator::new(AggFn::Sum);
        acc.push(&Value::Int(i64::MAX));
        acc.push(&Value::Int(1));
        assert!(matches!(acc.finish(), Value::Float(_)));
        let mut avg = Accumulator::new(AggFn::Avg);
        for v in [10, 20] {
            avg.push(&Value::Int(v));
        }
        assert_eq!(avg.finish(), Value::Float(15.0));
    }
}
