//! Drools Fusion DRL generation for single-stream rules.

use super::{epl::render_literal, fmt_number, CodegenError, GeneratedSource, Target};
use crate::model::{ArithExpr, Expression, Literal, LogicalOp, Operand, RuleModel, SelectItem, Window, WindowKind};
use crate::validator::validate;

/// One `rule ... end` block reading the single target from entry point
/// `"in"`. Patterns, joins, group-by, keep-all windows, `groupwin` and
/// computed select items are rejected with the path of the first offender.
pub fn generate_drl(model: &RuleModel) -> Result<GeneratedSource, CodegenError> {
    let diagnostics = validate(model);
    if !diagnostics.is_empty() {
        return Err(CodegenError::Invalid(diagnostics));
    }
    check_subset(model)?;

    let target = &model.targets[0];
    let constraints = model.condition.as_ref().map(render_constraint).unwrap_or_default();
    let mut pattern = format!("$e : {}({constraints})", target.event_name);
    if let Some(w) = &target.window {
        pattern.push_str(&format!(" over {}", render_window(w)));
    }
    pattern.push_str(" from entry-point \"in\"");

    let sink = model.output.as_ref().map_or(model.name.as_str(), |o| o.name.as_str());
    let text = format!(
        "rule \"{}\"\nwhen\n    {pattern}\nthen\n    entryPoints[\"{sink}\"].insert($e);\nend\n",
        model.name
    );
    Ok(GeneratedSource::new(Target::Drl, text))
}

fn unsupported(path: &str, message: &str) -> CodegenError {
    CodegenError::Unsupported {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn check_subset(model: &RuleModel) -> Result<(), CodegenError> {
    if model.pattern.is_some() {
        return Err(unsupported("pattern", "event patterns have no DRL translation"));
    }
    if model.targets.len() > 1 {
        return Err(unsupported(
            "targets[1]",
            "joins over several targets have no DRL translation",
        ));
    }
    if model.group_by.is_some() {
        return Err(unsupported("group_by", "group-by has no DRL translation"));
    }
    let target = &model.targets[0];
    if target.window.as_ref().is_some_and(|w| w.kind == WindowKind::KeepAll) {
        return Err(unsupported(
            "targets[0].window",
            "keep-all windows have no DRL translation",
        ));
    }
    if !target.group_win.is_empty() {
        return Err(unsupported("targets[0].group_win", "groupwin has no DRL translation"));
    }
    for (i, item) in model.bring.iter().enumerate() {
        if let SelectItem::Column { expr, .. } = item {
            if !matches!(expr, Operand::Attr(_)) {
                return Err(unsupported(
                    &format!("bring[{i}]"),
                    "only plain attributes can be brought in DRL",
                ));
            }
        }
    }
    Ok(())
}

fn render_window(w: &Window) -> String {
    match w.kind {
        WindowKind::Timer => {
            let secs = w.seconds.unwrap_or_default();
            if secs.fract() == 0.0 {
                format!("window:time({}s)", fmt_number(secs))
            } else {
                format!("window:time({}ms)", (secs * 1000.0).round() as i64)
            }
        }
        WindowKind::Counter => format!("window:length({})", w.count.unwrap_or_default()),
        WindowKind::KeepAll => unreachable!("rejected by check_subset"),
    }
}

fn render_constraint(e: &Expression) -> String {
    match e {
        Expression::Compare(c) => {
            let op = match c.op.symbol() {
                "=" => "==",
                other => other,
            };
            format!("{} {op} {}", render_operand(&c.lhs), render_operand(&c.rhs))
        }
        Expression::Logical(l) => {
            let parts: Vec<String> = l
                .children
                .iter()
                .map(|c| match c {
                    Expression::Logical(_) => format!("({})", render_constraint(c)),
                    _ => render_constraint(c),
                })
                .collect();
            match l.op {
                LogicalOp::And => parts.join(" && "),
                LogicalOp::Or => parts.join(" || "),
                LogicalOp::Not => format!("!({})", parts.join(" && ")),
            }
        }
        Expression::Arith(a) => render_arith(a),
    }
}

fn render_operand(op: &Operand) -> String {
    match op {
        Operand::Attr(r) => r.name.clone(),
        Operand::Literal(Literal::Str(s)) => {
            format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
        }
        Operand::Literal(l) => render_literal(l),
        Operand::Scalar(call) => {
            let args: Vec<String> = call.args.iter().map(render_operand).collect();
            format!("Math.{}({})", call.func.epl_name(), args.join(", "))
        }
        Operand::Arith(a) => render_arith(a),
        // aggregates never reach a constraint in a valid model
        Operand::Agg(call) => format!("{}()", call.func.as_str()),
    }
}

fn render_arith(a: &ArithExpr) -> String {
    let side = |o: &Operand| match o {
        Operand::Arith(_) => format!("({})", render_operand(o)),
        _ => render_operand(o),
    };
    format!("{} {} {}", side(&a.lhs), a.op.symbol(), side(&a.rhs))
}
