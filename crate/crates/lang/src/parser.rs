//! Recursive-descent parser and static checks.

use std::collections::BTreeSet;

use crate::ast::*;
use crate::error::{Span, SyntaxError, SyntaxErrorKind};
use crate::lexer::{tokenize, Lexed, Tok, Token};

pub const ENTRY_FUNCTION: &str = "program";
/// Names visible without a local binding.
pub const GLOBAL_NAMES: &[&str] = &["pySpatial", "range", "len"];

const MAX_EXPR_DEPTH: usize = 64;
const MAX_BLOCK_DEPTH: usize = 32;

/// Tokenizes, parses and validates `source`.
pub fn parse_program(source: &str) -> Result<Program, SyntaxError> {
    parse(tokenize(source)?)
}

pub fn parse(lexed: Lexed) -> Result<Program, SyntaxError> {
    let mut p = Parser { tokens: lexed.tokens, pos: 0, expr_depth: 0, block_depth: 0 };
    let mut defs = Vec::new();
    loop {
        p.skip_newlines();
        let t = p.peek().clone();
        match t.tok {
            Tok::Eof => break,
            Tok::Def => defs.push(p.funcdef()?),
            Tok::Forbidden(k) => return Err(forbidden(k, t.span)),
            _ => {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::EntryFunction,
                    t.span,
                    format!("only a single `def {ENTRY_FUNCTION}(...)` may appear at top level"),
                ))
            }
        }
    }
    let entry = match defs.len() {
        0 => {
            return Err(SyntaxError::new(
                SyntaxErrorKind::EntryFunction,
                Span::new(1, 1),
                format!("no `def {ENTRY_FUNCTION}(...)` found"),
            ))
        }
        1 => defs.pop().expect("one def"),
        n => {
            return Err(SyntaxError::new(
                SyntaxErrorKind::EntryFunction,
                defs[1].span,
                format!("found {n} top-level functions; exactly one named `{ENTRY_FUNCTION}` is allowed"),
            ))
        }
    };
    if entry.name != ENTRY_FUNCTION {
        return Err(SyntaxError::new(
            SyntaxErrorKind::EntryFunction,
            entry.span,
            format!("the function must be named `{ENTRY_FUNCTION}`, not `{}`", entry.name),
        ));
    }
    check_names(&entry)?;
    Ok(Program { entry, comments: lexed.comments })
}

fn forbidden(keyword: &str, span: Span) -> SyntaxError {
    SyntaxError::new(SyntaxErrorKind::ForbiddenConstruct, span, format!("'{keyword}' is not allowed"))
}

/// Every bare name must be a parameter, a name bound somewhere in the body,
/// or a global.
fn check_names(f: &FuncDef) -> Result<(), SyntaxError> {
    let mut bound: BTreeSet<String> = BTreeSet::new();
    bound.insert(f.param.name.clone());
    collect_bindings(&f.body, &mut bound);
    let mut err = None;
    visit_block(&f.body, &mut |e| {
        if err.is_some() {
            return;
        }
        if let ExprKind::Name(n) = &e.kind {
            if !bound.contains(n) && !GLOBAL_NAMES.contains(&n.as_str()) {
                err = Some(SyntaxError::new(SyntaxErrorKind::UnknownName, e.span, format!("name '{n}' is not defined")));
            }
        }
    });
    err.map_or(Ok(()), Err)
}

fn collect_bindings(body: &[Stmt], out: &mut BTreeSet<String>) {
    for s in body {
        match &s.kind {
            StmtKind::Assign { target: Target::Name(n), .. }
            | StmtKind::AugAssign { target: Target::Name(n), .. }
            | StmtKind::AnnAssign { target: n, .. } => {
                out.insert(n.clone());
            }
            StmtKind::For { var, body, .. } => {
                out.insert(var.clone());
                collect_bindings(body, out);
            }
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    collect_bindings(b, out);
                }
                if let Some(b) = orelse {
                    collect_bindings(b, out);
                }
            }
            _ => {}
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    expr_depth: usize,
    block_depth: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek().tok, Tok::Op(o) if o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        let t = self.peek();
        match t.tok {
            Tok::Forbidden(k) => forbidden(k, t.span),
            Tok::Indent => SyntaxError::new(SyntaxErrorKind::Syntax, t.span, "unexpected indent").with_hint(expected),
            _ => SyntaxError::new(SyntaxErrorKind::Syntax, t.span, format!("unexpected {}", t.tok))
                .with_hint(format!("expected {expected}")),
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Span> {
        if self.at_op(op) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("'{op}'")))
        }
    }

    fn expect_name(&mut self) -> PResult<(String, Span)> {
        match self.peek().tok.clone() {
            Tok::Name(n) => {
                let span = self.advance().span;
                Ok((n, span))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.advance();
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek().tok {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            Tok::Op(";") => Err(SyntaxError::new(
                SyntaxErrorKind::Syntax,
                self.peek().span,
                "semicolons are not supported; put each statement on its own line",
            )),
            Tok::Op(",") => Err(SyntaxError::new(
                SyntaxErrorKind::Syntax,
                self.peek().span,
                "tuples are not supported; use a list",
            )),
            _ => Err(self.unexpected("end of line")),
        }
    }

    fn funcdef(&mut self) -> PResult<FuncDef> {
        let span = self.advance().span;
        let (name, _) = self.expect_name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.at_op(")") {
            let (pname, pspan) = self.expect_name()?;
            let annotation = if self.eat_op(":") { Some(self.expr()?) } else { None };
            if self.at_op("=") {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::Syntax,
                    self.peek().span,
                    "default parameter values are not supported",
                ));
            }
            params.push((Param { name: pname, annotation }, pspan));
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        let returns = if self.eat_op("->") { Some(self.expr()?) } else { None };
        self.expect_op(":")?;
        let body = self.suite()?;
        if params.len() != 1 {
            return Err(SyntaxError::new(
                SyntaxErrorKind::EntryFunction,
                span,
                format!("`{name}` must take exactly one parameter (the scene), found {}", params.len()),
            ));
        }
        let (param, _) = params.pop().expect("one param");
        Ok(FuncDef { name, param, returns, body, span })
    }

    /// The body after a `:`: either an indented block or one simple
    /// statement on the same line.
    fn suite(&mut self) -> PResult<Vec<Stmt>> {
        if self.peek().tok != Tok::Newline {
            let s = self.simple_statement()?;
            return Ok(vec![s]);
        }
        self.advance();
        if self.peek().tok != Tok::Indent {
            return Err(self.unexpected("an indented block"));
        }
        let indent = self.advance().span;
        self.block_depth += 1;
        if self.block_depth > MAX_BLOCK_DEPTH {
            return Err(SyntaxError::new(SyntaxErrorKind::Syntax, indent, "blocks are nested too deeply"));
        }
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek().tok {
                Tok::Dedent => {
                    self.advance();
                    break;
                }
                Tok::Eof => break,
                _ => body.push(self.statement()?),
            }
        }
        self.block_depth -= 1;
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        match t.tok {
            Tok::For => {
                self.advance();
                let (var, _) = self.expect_name()?;
                if self.at_op(",") {
                    return Err(SyntaxError::new(
                        SyntaxErrorKind::Syntax,
                        self.peek().span,
                        "tuple unpacking in for loops is not supported",
                    ));
                }
                if self.peek().tok != Tok::In {
                    return Err(self.unexpected("'in'"));
                }
                self.advance();
                let iter = self.expr()?;
                self.expect_op(":")?;
                let body = self.suite()?;
                Ok(Stmt { kind: StmtKind::For { var, iter, body }, span: t.span })
            }
            Tok::If => {
                self.advance();
                let mut branches = Vec::new();
                let cond = self.expr()?;
                self.expect_op(":")?;
                branches.push((cond, self.suite()?));
                let mut orelse = None;
                loop {
                    self.skip_blank_before(&[Tok::Elif, Tok::Else]);
                    match self.peek().tok {
                        Tok::Elif => {
                            self.advance();
                            let cond = self.expr()?;
                            self.expect_op(":")?;
                            branches.push((cond, self.suite()?));
                        }
                        Tok::Else => {
                            self.advance();
                            self.expect_op(":")?;
                            orelse = Some(self.suite()?);
                            break;
                        }
                        _ => break,
                    }
                }
                Ok(Stmt { kind: StmtKind::If { branches, orelse }, span: t.span })
            }
            Tok::Def => Err(SyntaxError::new(
                SyntaxErrorKind::ForbiddenConstruct,
                t.span,
                "nested function definitions are not allowed",
            )),
            Tok::Elif | Tok::Else => Err(SyntaxError::new(
                SyntaxErrorKind::Syntax,
                t.span,
                format!("{} without a matching 'if'", t.tok),
            )),
            _ => self.simple_statement(),
        }
    }

    /// Lets `elif`/`else` follow blank lines after an `if` block.
    fn skip_blank_before(&mut self, wanted: &[Tok]) {
        let mut look = 0;
        while *self.peek_at(look) == Tok::Newline {
            look += 1;
        }
        if wanted.contains(self.peek_at(look)) {
            for _ in 0..look {
                self.advance();
            }
        }
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Return => {
                self.advance();
                let value = if matches!(self.peek().tok, Tok::Newline | Tok::Eof | Tok::Dedent) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.end_of_statement()?;
                return Ok(Stmt { kind: StmtKind::Return(value), span: t.span });
            }
            Tok::For | Tok::If | Tok::Def => {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::Syntax,
                    t.span,
                    format!("{} must start on its own line", t.tok),
                ))
            }
            Tok::Forbidden(k) => return Err(forbidden(k, t.span)),
            _ => {}
        }
        let first = self.expr()?;
        let aug = match self.peek().tok {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        };
        let kind = if let Some(op) = aug {
            self.advance();
            let target = to_target(first)?;
            let value = self.expr()?;
            StmtKind::AugAssign { target, op, value }
        } else if self.at_op("=") {
            self.advance();
            let target = to_target(first)?;
            let value = self.expr()?;
            if self.at_op("=") {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::Syntax,
                    self.peek().span,
                    "chained assignment is not supported",
                ));
            }
            StmtKind::Assign { target, value }
        } else if self.at_op(":") {
            let ExprKind::Name(name) = first.kind else {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::Syntax,
                    self.peek().span,
                    "only simple names can be annotated",
                ));
            };
            self.advance();
            let annotation = self.expr()?;
            let value = if self.eat_op("=") { Some(self.expr()?) } else { None };
            StmtKind::AnnAssign { target: name, annotation, value }
        } else {
            StmtKind::Expr(first)
        };
        self.end_of_statement()?;
        Ok(Stmt { kind, span: t.span })
    }

    fn enter(&mut self, span: Span) -> PResult<()> {
        self.expr_depth += 1;
        if self.expr_depth > MAX_EXPR_DEPTH {
            return Err(SyntaxError::new(SyntaxErrorKind::Syntax, span, "expression is nested too deeply"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.expr_depth -= 1;
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let span = self.peek().span;
        self.enter(span)?;
        let e = self.or_test();
        self.leave();
        let e = e?;
        if self.peek().tok == Tok::If {
            return Err(SyntaxError::new(
                SyntaxErrorKind::ForbiddenConstruct,
                self.peek().span,
                "conditional expressions are not supported; use an if statement",
            ));
        }
        Ok(e)
    }

    fn bool_chain(&mut self, tok: Tok, op: BoolOp, next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let first = next(self)?;
        if self.peek().tok != tok {
            return Ok(first);
        }
        let span = first.span;
        let mut values = vec![first];
        while self.peek().tok == tok {
            self.advance();
            values.push(next(self)?);
        }
        Ok(Expr { kind: ExprKind::BoolOp { op, values }, span })
    }

    fn or_test(&mut self) -> PResult<Expr> {
        self.bool_chain(Tok::Or, BoolOp::Or, Self::and_test)
    }

    fn and_test(&mut self) -> PResult<Expr> {
        self.bool_chain(Tok::And, BoolOp::And, Self::not_test)
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.peek().tok == Tok::Not {
            let span = self.advance().span;
            self.enter(span)?;
            let operand = self.not_test();
            self.leave();
            return Ok(Expr { kind: ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand?) }, span });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.peek().tok {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::Ne,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::Le,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::Ge,
                Tok::In => CmpOp::In,
                Tok::Not if *self.peek_at(1) == Tok::In => {
                    self.advance();
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.advance();
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            return Ok(first);
        }
        let span = first.span;
        Ok(Expr { kind: ExprKind::Compare { first: Box::new(first), rest }, span })
    }

    fn arith(&mut self) -> PResult<Expr> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.term()?;
            let span = left.span;
            left = Expr { kind: ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, span };
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut left = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                Tok::Op("@") => {
                    return Err(SyntaxError::new(
                        SyntaxErrorKind::ForbiddenConstruct,
                        self.peek().span,
                        "matrix multiplication is not supported",
                    ))
                }
                _ => return Ok(left),
            };
            self.advance();
            let right = self.factor()?;
            let span = left.span;
            left = Expr { kind: ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, span };
        }
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.peek().tok {
            Tok::Op("-") => Some(UnaryOp::Neg),
            Tok::Op("+") => Some(UnaryOp::Pos),
            _ => None,
        };
        if let Some(op) = op {
            let span = self.advance().span;
            self.enter(span)?;
            let operand = self.factor();
            self.leave();
            return Ok(Expr { kind: ExprKind::Unary { op, operand: Box::new(operand?) }, span });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if !self.at_op("**") {
            return Ok(base);
        }
        let span = self.advance().span;
        self.enter(span)?;
        let exp = self.factor();
        self.leave();
        let span = base.span;
        Ok(Expr { kind: ExprKind::Binary { op: BinOp::Pow, left: Box::new(base), right: Box::new(exp?) }, span })
    }

    fn primary(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        loop {
            if self.at_op("(") {
                let open = self.advance().span;
                self.enter(open)?;
                let call = self.call_args();
                self.leave();
                let (args, kwargs) = call?;
                let span = e.span;
                e = Expr { kind: ExprKind::Call { func: Box::new(e), args, kwargs }, span };
            } else if self.at_op("[") {
                let open = self.advance().span;
                if self.at_op(":") {
                    return Err(slice_error(self.peek().span));
                }
                let index = self.expr()?;
                if self.at_op(":") {
                    return Err(slice_error(self.peek().span));
                }
                if self.at_op(",") {
                    return Err(SyntaxError::new(
                        SyntaxErrorKind::Syntax,
                        self.peek().span,
                        "multi-dimensional indexing is not supported",
                    ));
                }
                self.expect_op("]").map_err(|e| e.with_hint(format!("expected ']' to close '[' at {open}")))?;
                let span = e.span;
                e = Expr { kind: ExprKind::Index { object: Box::new(e), index: Box::new(index) }, span };
            } else if self.at_op(".") {
                self.advance();
                let (name, _) = self.expect_name()?;
                let span = e.span;
                e = Expr { kind: ExprKind::Attribute { object: Box::new(e), name }, span };
            } else {
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> PResult<(Vec<Expr>, Vec<(String, Expr)>)> {
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        while !self.at_op(")") {
            if self.at_op("*") || self.at_op("**") {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::ForbiddenConstruct,
                    self.peek().span,
                    "argument unpacking is not supported",
                ));
            }
            if let (Tok::Name(n), Tok::Op("=")) = (self.peek().tok.clone(), self.peek_at(1).clone()) {
                let span = self.advance().span;
                self.advance();
                if kwargs.iter().any(|(k, _)| *k == n) {
                    return Err(SyntaxError::new(SyntaxErrorKind::Syntax, span, format!("keyword argument '{n}' repeated")));
                }
                kwargs.push((n, self.expr()?));
            } else {
                let e = self.expr()?;
                if !kwargs.is_empty() {
                    return Err(SyntaxError::new(
                        SyntaxErrorKind::Syntax,
                        e.span,
                        "positional argument follows keyword argument",
                    ));
                }
                if self.peek().tok == Tok::For {
                    return Err(comprehension_error(self.peek().span));
                }
                args.push(e);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok((args, kwargs))
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        let kind = match t.tok {
            Tok::Name(n) => ExprKind::Name(n),
            Tok::Int(i) => ExprKind::Int(i),
            Tok::Float(x) => ExprKind::Float(x),
            Tok::Str(s) => {
                self.advance();
                let mut s = s;
                while let Tok::Str(more) = &self.peek().tok {
                    s.push_str(more);
                    self.advance();
                }
                return Ok(Expr { kind: ExprKind::Str(s), span: t.span });
            }
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::None => ExprKind::None,
            Tok::Op("(") => {
                self.advance();
                if self.at_op(")") {
                    return Err(SyntaxError::new(SyntaxErrorKind::Syntax, t.span, "tuples are not supported; use a list"));
                }
                let inner = self.expr()?;
                if self.at_op(",") {
                    return Err(SyntaxError::new(
                        SyntaxErrorKind::Syntax,
                        self.peek().span,
                        "tuples are not supported; use a list",
                    ));
                }
                if self.peek().tok == Tok::For {
                    return Err(comprehension_error(self.peek().span));
                }
                self.expect_op(")")?;
                // Parentheses only group; the inner node keeps its own span.
                return Ok(inner);
            }
            Tok::Op("[") => {
                self.advance();
                let mut items = Vec::new();
                while !self.at_op("]") {
                    items.push(self.expr()?);
                    if self.peek().tok == Tok::For {
                        return Err(comprehension_error(self.peek().span));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("]")?;
                return Ok(Expr { kind: ExprKind::List(items), span: t.span });
            }
            Tok::Op("{") => {
                return Err(SyntaxError::new(
                    SyntaxErrorKind::ForbiddenConstruct,
                    t.span,
                    "dict and set literals are not supported",
                ))
            }
            _ => return Err(self.unexpected("an expression")),
        };
        self.advance();
        Ok(Expr { kind, span: t.span })
    }
}

fn slice_error(span: Span) -> SyntaxError {
    SyntaxError::new(SyntaxErrorKind::Syntax, span, "slicing is not supported; index single elements")
}

fn comprehension_error(span: Span) -> SyntaxError {
    SyntaxError::new(SyntaxErrorKind::ForbiddenConstruct, span, "comprehensions are not supported; use a for loop")
}

fn to_target(e: Expr) -> PResult<Target> {
    match e.kind {
        ExprKind::Name(n) => Ok(Target::Name(n)),
        ExprKind::Index { object, index } => Ok(Target::Index { object: *object, index: *index }),
        ExprKind::Attribute { .. } => {
            Err(SyntaxError::new(SyntaxErrorKind::ForbiddenConstruct, e.span, "attribute assignment is not allowed"))
        }
        _ => Err(SyntaxError::new(SyntaxErrorKind::Syntax, e.span, "cannot assign to this expression")),
    }
}
