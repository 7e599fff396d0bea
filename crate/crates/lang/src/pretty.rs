//! Canonical source rendering. Compound operands are always parenthesized,
//! so the output reparses to the same tree.

use std::fmt::Write;

use crate::ast::*;

pub fn pretty_print(program: &Program) -> String {
    let f = &program.entry;
    let mut out = String::new();
    write!(out, "def {}({}", f.name, f.param.name).unwrap();
    if let Some(a) = &f.param.annotation {
        write!(out, ": {}", expr(a)).unwrap();
    }
    out.push(')');
    if let Some(r) = &f.returns {
        write!(out, " -> {}", expr(r)).unwrap();
    }
    out.push_str(":\n");
    block(&mut out, &f.body, 1);
    out
}

fn block(out: &mut String, body: &[Stmt], level: usize) {
    for s in body {
        stmt(out, s, level);
    }
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    let pad = "    ".repeat(level);
    match &s.kind {
        StmtKind::Assign { target: t, value } => writeln!(out, "{pad}{} = {}", target(t), expr(value)).unwrap(),
        StmtKind::AnnAssign { target, annotation, value } => {
            write!(out, "{pad}{target}: {}", expr(annotation)).unwrap();
            if let Some(v) = value {
                write!(out, " = {}", expr(v)).unwrap();
            }
            out.push('\n');
        }
        StmtKind::AugAssign { target: t, op, value } => {
            writeln!(out, "{pad}{} {}= {}", target(t), op.symbol(), expr(value)).unwrap()
        }
        StmtKind::Expr(e) => writeln!(out, "{pad}{}", expr(e)).unwrap(),
        StmtKind::For { var, iter, body } => {
            writeln!(out, "{pad}for {var} in {}:", expr(iter)).unwrap();
            block(out, body, level + 1);
        }
        StmtKind::If { branches, orelse } => {
            for (i, (cond, body)) in branches.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "elif" };
                writeln!(out, "{pad}{kw} {}:", expr(cond)).unwrap();
                block(out, body, level + 1);
            }
            if let Some(body) = orelse {
                writeln!(out, "{pad}else:").unwrap();
                block(out, body, level + 1);
            }
        }
        StmtKind::Return(None) => writeln!(out, "{pad}return").unwrap(),
        StmtKind::Return(Some(e)) => writeln!(out, "{pad}return {}", expr(e)).unwrap(),
    }
}

fn target(t: &Target) -> String {
    match t {
        Target::Name(n) => n.clone(),
        Target::Index { object, index } => format!("{}[{}]", postfix_operand(object), expr(index)),
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(i) if *i < 0 => format!("({i})"),
        ExprKind::Int(i) => i.to_string(),
        ExprKind::Float(x) => float_literal(*x),
        ExprKind::Str(s) => string_literal(s),
        ExprKind::Bool(true) => "True".into(),
        ExprKind::Bool(false) => "False".into(),
        ExprKind::None => "None".into(),
        ExprKind::Name(n) => n.clone(),
        ExprKind::List(items) => format!("[{}]", items.iter().map(expr).collect::<Vec<_>>().join(", ")),
        ExprKind::Attribute { object, name } => format!("{}.{name}", postfix_operand(object)),
        ExprKind::Index { object, index } => format!("{}[{}]", postfix_operand(object), expr(index)),
        ExprKind::Call { func, args, kwargs } => {
            let mut parts: Vec<String> = args.iter().map(expr).collect();
            parts.extend(kwargs.iter().map(|(k, v)| format!("{k}={}", expr(v))));
            format!("{}({})", postfix_operand(func), parts.join(", "))
        }
        ExprKind::Unary { op, operand } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Pos => "+",
                UnaryOp::Not => "not ",
            };
            format!("{sym}{}", operand_of(operand))
        }
        ExprKind::Binary { op, left, right } => {
            format!("{} {} {}", operand_of(left), op.symbol(), operand_of(right))
        }
        ExprKind::Compare { first, rest } => {
            let mut s = operand_of(first);
            for (op, v) in rest {
                write!(s, " {} {}", op.symbol(), operand_of(v)).unwrap();
            }
            s
        }
        ExprKind::BoolOp { op, values } => {
            let sep = match op {
                BoolOp::And => " and ",
                BoolOp::Or => " or ",
            };
            values.iter().map(operand_of).collect::<Vec<_>>().join(sep)
        }
    }
}

fn is_compound(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Unary { .. } | ExprKind::Binary { .. } | ExprKind::Compare { .. } | ExprKind::BoolOp { .. }
    ) || matches!(e.kind, ExprKind::Int(i) if i < 0)
        || matches!(e.kind, ExprKind::Float(x) if x.is_sign_negative())
}

fn operand_of(e: &Expr) -> String {
    if is_compound(e) {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

fn postfix_operand(e: &Expr) -> String {
    // `1.real` would lex as a float, so numeric receivers get parentheses.
    if is_compound(e) || matches!(e.kind, ExprKind::Int(_) | ExprKind::Float(_)) {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

fn float_literal(x: f64) -> String {
    if x.is_nan() || x.is_infinite() {
        // Unreachable from parsed source; keeps output well-formed anyway.
        return "(1e999 - 1e999)".into();
    }
    let s = format!("{x:?}");
    if s.starts_with('-') {
        format!("({s})")
    } else {
        s
    }
}

fn string_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => write!(out, "\\u{:04x}", c as u32).unwrap(),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
