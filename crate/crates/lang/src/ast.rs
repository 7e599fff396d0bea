use crate::error::Span;
use crate::lexer::Comment;

/// A parsed program: the single entry function plus the source comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub entry: FuncDef,
    pub comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    pub name: String,
    pub param: Param,
    pub returns: Option<Expr>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    /// Parsed but never evaluated.
    pub annotation: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { target: Target, value: Expr },
    AnnAssign { target: String, annotation: Expr, value: Option<Expr> },
    AugAssign { target: Target, op: BinOp, value: Expr },
    Expr(Expr),
    For { var: String, iter: Expr, body: Vec<Stmt> },
    If { branches: Vec<(Expr, Vec<Stmt>)>, orelse: Option<Vec<Stmt>> },
    Return(Option<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(String),
    Index { object: Expr, index: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    Name(String),
    List(Vec<Expr>),
    Attribute { object: Box<Expr>, name: String },
    Index { object: Box<Expr>, index: Box<Expr> },
    Call { func: Box<Expr>, args: Vec<Expr>, kwargs: Vec<(String, Expr)> },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Compare { first: Box<Expr>, rest: Vec<(CmpOp, Expr)> },
    BoolOp { op: BoolOp, values: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Pos,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

impl Program {
    /// Copy with every span zeroed and comments dropped, for structural
    /// comparison.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        p.comments.clear();
        p.entry.span = Span::default();
        if let Some(a) = &mut p.entry.param.annotation {
            clear_expr(a);
        }
        if let Some(r) = &mut p.entry.returns {
            clear_expr(r);
        }
        clear_block(&mut p.entry.body);
        p
    }

    /// Number of call expressions whose callee is `pySpatial.<name>`.
    pub fn count_tool_calls(&self, name: &str) -> usize {
        let mut n = 0;
        visit_block(&self.entry.body, &mut |e| {
            if let ExprKind::Call { func, .. } = &e.kind {
                if let ExprKind::Attribute { object, name: attr } = &func.kind {
                    if attr == name && matches!(&object.kind, ExprKind::Name(ns) if ns == "pySpatial") {
                        n += 1;
                    }
                }
            }
        });
        n
    }
}

fn clear_block(body: &mut [Stmt]) {
    for s in body {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Assign { target, value } | StmtKind::AugAssign { target, value, .. } => {
                clear_target(target);
                clear_expr(value);
            }
            StmtKind::AnnAssign { annotation, value, .. } => {
                clear_expr(annotation);
                if let Some(v) = value {
                    clear_expr(v);
                }
            }
            StmtKind::Expr(e) => clear_expr(e),
            StmtKind::For { iter, body, .. } => {
                clear_expr(iter);
                clear_block(body);
            }
            StmtKind::If { branches, orelse } => {
                for (c, b) in branches {
                    clear_expr(c);
                    clear_block(b);
                }
                if let Some(b) = orelse {
                    clear_block(b);
                }
            }
            StmtKind::Return(Some(e)) => clear_expr(e),
            StmtKind::Return(None) => {}
        }
    }
}

fn clear_target(t: &mut Target) {
    if let Target::Index { object, index } = t {
        clear_expr(object);
        clear_expr(index);
    }
}

fn clear_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::List(items) => items.iter_mut().for_each(clear_expr),
        ExprKind::Attribute { object, .. } => clear_expr(object),
        ExprKind::Index { object, index } => {
            clear_expr(object);
            clear_expr(index);
        }
        ExprKind::Call { func, args, kwargs } => {
            clear_expr(func);
            args.iter_mut().for_each(clear_expr);
            kwargs.iter_mut().for_each(|(_, v)| clear_expr(v));
        }
        ExprKind::Unary { operand, .. } => clear_expr(operand),
        ExprKind::Binary { left, right, .. } => {
            clear_expr(left);
            clear_expr(right);
        }
        ExprKind::Compare { first, rest } => {
            clear_expr(first);
            rest.iter_mut().for_each(|(_, v)| clear_expr(v));
        }
        ExprKind::BoolOp { values, .. } => values.iter_mut().for_each(clear_expr),
        _ => {}
    }
}

/// Calls `f` on every expression in `body`, outer before inner.
pub fn visit_block(body: &[Stmt], f: &mut impl FnMut(&Expr)) {
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, value } | StmtKind::AugAssign { target, value, .. } => {
                if let Target::Index { object, index } = target {
                    visit_expr(object, f);
                    visit_expr(index, f);
                }
                visit_expr(value, f);
            }
            StmtKind::AnnAssign { value, .. } => {
                if let Some(v) = value {
                    visit_expr(v, f);
                }
            }
            StmtKind::Expr(e) => visit_expr(e, f),
            StmtKind::For { iter, body, .. } => {
                visit_expr(iter, f);
                visit_block(body, f);
            }
            StmtKind::If { branches, orelse } => {
                for (c, b) in branches {
                    visit_expr(c, f);
                    visit_block(b, f);
                }
                if let Some(b) = orelse {
                    visit_block(b, f);
                }
            }
            StmtKind::Return(Some(e)) => visit_expr(e, f),
            StmtKind::Return(None) => {}
        }
    }
}

pub fn visit_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match &e.kind {
        ExprKind::List(items) => items.iter().for_each(|i| visit_expr(i, f)),
        ExprKind::Attribute { object, .. } => visit_expr(object, f),
        ExprKind::Index { object, index } => {
            visit_expr(object, f);
            visit_expr(index, f);
        }
        ExprKind::Call { func, args, kwargs } => {
            visit_expr(func, f);
            args.iter().for_each(|a| visit_expr(a, f));
            kwargs.iter().for_each(|(_, v)| visit_expr(v, f));
        }
        ExprKind::Unary { operand, .. } => visit_expr(operand, f),
        ExprKind::Binary { left, right, .. } => {
            visit_expr(left, f);
            visit_expr(right, f);
        }
        ExprKind::Compare { first, rest } => {
            visit_expr(first, f);
            rest.iter().for_each(|(_, v)| visit_expr(v, f));
        }
        ExprKind::BoolOp { values, .. } => values.iter().for_each(|v| visit_expr(v, f)),
        _ => {}
    }
}
