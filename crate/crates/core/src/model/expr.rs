//! Condition and projection expressions.

use serde::{Deserialize, Serialize};

/// Reference to `alias.name`. The alias names a target binding, or a pattern
/// tag in pattern rules.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttrRef {
    pub alias: String,
    pub name: String,
}

impl AttrRef {
    pub fn new(alias: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            alias: alias.into(),
            name: name.into(),
        }
    }
}

/// A free value typed by its JSON representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Avg,
    Sum,
    Max,
    Min,
    Count,
}

impl AggFn {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Avg => "avg",
            AggFn::Sum => "sum",
            AggFn::Max => "max",
            AggFn::Min => "min",
            AggFn::Count => "count",
        }
    }
}

/// Aggregation over the rows currently retained by the rule. A missing target
/// stands for `*` and is only meaningful for `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggCall {
    #[serde(rename = "fn")]
    pub func: AggFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AttrRef>,
}

/// Row-level two-argument functions, distinct from the `max`/`min` aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFn {
    Max2,
    Min2,
}

impl ScalarFn {
    pub fn epl_name(self) -> &'static str {
        match self {
            ScalarFn::Max2 => "max",
            ScalarFn::Min2 => "min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarCall {
    #[serde(rename = "fn")]
    pub func: ScalarFn,
    pub args: Vec<Operand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArithExpr {
    pub op: ArithOp,
    pub lhs: Box<Operand>,
    pub rhs: Box<Operand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub op: CompareOp,
    pub lhs: Operand,
    pub rhs: Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalOp {
    And,
    Or,
    Not,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicalExpr {
    pub op: LogicalOp,
    pub children: Vec<Expression>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expression {
    Compare(Comparison),
    Logical(LogicalExpr),
    Arith(ArithExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Attr(AttrRef),
    Literal(Literal),
    Agg(AggCall),
    Scalar(ScalarCall),
    Arith(ArithExpr),
}

impl Operand {
    pub fn attr(alias: impl Into<String>, name: impl Into<String>) -> Self {
        Operand::Attr(AttrRef::new(alias, name))
    }

    pub fn int(v: i64) -> Self {
        Operand::Literal(Literal::Int(v))
    }

    pub fn float(v: f64) -> Self {
        Operand::Literal(Literal::Float(v))
    }

    pub fn string(v: impl Into<String>) -> Self {
        Operand::Literal(Literal::Str(v.into()))
    }

    pub fn boolean(v: bool) -> Self {
        Operand::Literal(Literal::Bool(v))
    }

    pub fn agg(func: AggFn, target: Option<AttrRef>) -> Self {
        Operand::Agg(AggCall { func, target })
    }

    pub fn scalar(func: ScalarFn, args: Vec<Operand>) -> Self {
        Operand::Scalar(ScalarCall { func, args })
    }

    pub fn arith(op: ArithOp, lhs: Operand, rhs: Operand) -> Self {
        Operand::Arith(ArithExpr {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    /// True if an aggregation call occurs anywhere inside the operand.
    pub fn contains_aggregate(&self) -> bool {
        match self {
            Operand::Agg(_) => true,
            Operand::Attr(_) | Operand::Literal(_) => false,
            Operand::Scalar(call) => call.args.iter().any(Operand::contains_aggregate),
            Operand::Arith(a) => a.lhs.contains_aggregate() || a.rhs.contains_aggregate(),
        }
    }

    /// Attribute references outside of any aggregation call.
    pub fn free_attrs(&self) -> Vec<&AttrRef> {
        let mut out = Vec::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free<'a>(&'a self, out: &mut Vec<&'a AttrRef>) {
        match self {
            Operand::Attr(r) => out.push(r),
            Operand::Literal(_) | Operand::Agg(_) => {}
            Operand::Scalar(call) => call.args.iter().for_each(|a| a.collect_free(out)),
            Operand::Arith(a) => {
                a.lhs.collect_free(out);
                a.rhs.collect_free(out);
            }
        }
    }
}

impl Expression {
    pub fn compare(op: CompareOp, lhs: Operand, rhs: Operand) -> Self {
        Expression::Compare(Comparison { op, lhs, rhs })
    }

    pub fn and(children: Vec<Expression>) -> Self {
        Expression::Logical(LogicalExpr {
            op: LogicalOp::And,
            children,
        })
    }

    pub fn or(children: Vec<Expression>) -> Self {
        Expression::Logical(LogicalExpr {
            op: LogicalOp::Or,
            children,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: Expression) -> Self {
        Expression::Logical(LogicalExpr {
            op: LogicalOp::Not,
            children: vec![child],
        })
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Expression::Compare(c) => c.lhs.contains_aggregate() || c.rhs.contains_aggregate(),
            Expression::Logical(l) => l.children.iter().any(Expression::contains_aggregate),
            Expression::Arith(a) => a.lhs.contains_aggregate() || a.rhs.contains_aggregate(),
        }
    }

    /// Rewrites every literal in place.
    pub(crate) fn map_literals(&mut self, f: &impl Fn(&mut Literal)) {
        match self {
            Expression::Compare(c) => {
                c.lhs.map_literals(f);
                c.rhs.map_literals(f);
            }
            Expression::Logical(l) => l.children.iter_mut().for_each(|c| c.map_literals(f)),
            Expression::Arith(a) => {
                a.lhs.map_literals(f);
                a.rhs.map_literals(f);
            }
        }
    }
}

impl Operand {
    pub(crate) fn map_literals(&mut self, f: &impl Fn(&mut Literal)) {
        match self {
            Operand::Literal(l) => f(l),
            Operand::Attr(_) | Operand::Agg(_) => {}
            Operand::Scalar(call) => call.args.iter_mut().for_each(|a| a.map_literals(f)),
            Operand::Arith(a) => {
                a.lhs.map_literals(f);
                a.rhs.map_literals(f);
            }
        }
    }
}
