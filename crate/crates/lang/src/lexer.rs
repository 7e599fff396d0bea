//! Source text to tokens. Indentation becomes `Indent`/`Dedent` tokens;
//! newlines inside brackets and after a backslash are joined.

use std::fmt;

use crate::error::{Span, SyntaxError, SyntaxErrorKind};

/// Keywords outside the accepted grammar. They lex as `Tok::Forbidden` so the
/// parser can reject them with their location.
pub const FORBIDDEN_KEYWORDS: &[&str] = &[
    "import", "from", "while", "class", "lambda", "try", "except", "finally", "with", "as", "yield", "global",
    "nonlocal", "del", "assert", "raise", "async", "await", "pass", "break", "continue", "is",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Def,
    Return,
    For,
    In,
    If,
    Elif,
    Else,
    And,
    Or,
    Not,
    True,
    False,
    None,
    Forbidden(&'static str),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "name '{n}'"),
            Tok::Int(i) => write!(f, "integer {i}"),
            Tok::Float(x) => write!(f, "number {x}"),
            Tok::Str(_) => f.write_str("string"),
            Tok::Def => f.write_str("'def'"),
            Tok::Return => f.write_str("'return'"),
            Tok::For => f.write_str("'for'"),
            Tok::In => f.write_str("'in'"),
            Tok::If => f.write_str("'if'"),
            Tok::Elif => f.write_str("'elif'"),
            Tok::Else => f.write_str("'else'"),
            Tok::And => f.write_str("'and'"),
            Tok::Or => f.write_str("'or'"),
            Tok::Not => f.write_str("'not'"),
            Tok::True => f.write_str("'True'"),
            Tok::False => f.write_str("'False'"),
            Tok::None => f.write_str("'None'"),
            Tok::Forbidden(k) => write!(f, "'{k}'"),
            Tok::Op(o) => write!(f, "'{o}'"),
            Tok::Newline => f.write_str("end of line"),
            Tok::Indent => f.write_str("indent"),
            Tok::Dedent => f.write_str("dedent"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub line: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub comments: Vec<Comment>,
}

// Longest first so that "**=" wins over "**" and "*".
const OPERATORS: &[&str] = &[
    "**=", "//=", "->", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", ":=", "+", "-", "*", "/",
    "%", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "@", "&", "|", "^", "~",
];

pub fn tokenize(source: &str) -> Result<Lexed, SyntaxError> {
    Lexer::new(source).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    indents: Vec<String>,
    depth: Vec<(char, Span)>,
    tokens: Vec<Token>,
    comments: Vec<Comment>,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            indents: vec![String::new()],
            depth: Vec::new(),
            tokens: Vec::new(),
            comments: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn push(&mut self, tok: Tok, span: Span) {
        self.tokens.push(Token { tok, span });
    }

    fn err(&self, kind: SyntaxErrorKind, span: Span, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(kind, span, msg)
    }

    fn run(mut self) -> Result<Lexed, SyntaxError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth.is_empty() {
                if !self.indentation()? {
                    break;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek(0) else { break };
            let span = self.span();
            match c {
                '\n' => {
                    self.bump();
                    if self.depth.is_empty() {
                        self.push(Tok::Newline, span);
                        at_line_start = true;
                    }
                }
                '\r' if self.peek(1) == Some('\n') => {
                    self.bump();
                }
                ' ' | '\t' | '\x0c' | '\r' => {
                    self.bump();
                }
                '#' => self.comment(),
                '\\' => {
                    self.bump();
                    if self.peek(0) == Some('\r') {
                        self.bump();
                    }
                    if self.peek(0) != Some('\n') {
                        return Err(self.err(SyntaxErrorKind::Syntax, span, "unexpected character after line continuation"));
                    }
                    self.bump();
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number(span)?
                }
                c if c == '_' || c.is_alphabetic() => self.word(span)?,
                '"' | '\'' => {
                    let s = self.string(span, false)?;
                    self.push(Tok::Str(s), span);
                }
                _ => self.operator(span)?,
            }
        }
        if let Some(&(open, span)) = self.depth.last() {
            return Err(self.err(SyntaxErrorKind::Syntax, span, format!("'{open}' was never closed")));
        }
        let end = self.span();
        if self.tokens.last().is_some_and(|t| !matches!(t.tok, Tok::Newline | Tok::Dedent | Tok::Indent)) {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(Lexed { tokens: self.tokens, comments: self.comments })
    }

    /// Measures the indentation of the next logical line and emits
    /// indent/dedent tokens. Blank and comment-only lines are consumed.
    /// Returns false at end of input.
    fn indentation(&mut self) -> Result<bool, SyntaxError> {
        loop {
            let line_start = self.span();
            let mut prefix = String::new();
            while let Some(c @ (' ' | '\t' | '\x0c')) = self.peek(0) {
                prefix.push(c);
                self.bump();
            }
            match self.peek(0) {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('\r') if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                    continue;
                }
                Some('#') => {
                    self.comment();
                    continue;
                }
                _ => {}
            }
            let span = self.span();
            let top = self.indents.last().expect("indent stack is never empty").clone();
            if prefix == top {
                return Ok(true);
            }
            if prefix.len() > top.len() && prefix.starts_with(&top) {
                self.indents.push(prefix);
                self.push(Tok::Indent, span);
                return Ok(true);
            }
            if top.starts_with(&prefix) {
                while self.indents.last().is_some_and(|t| t.len() > prefix.len()) {
                    self.indents.pop();
                    self.push(Tok::Dedent, span);
                }
                if self.indents.last().is_some_and(|t| *t == prefix) {
                    return Ok(true);
                }
                return Err(self
                    .err(SyntaxErrorKind::InconsistentIndentation, line_start, "unindent does not match any outer level"));
            }
            return Err(self.err(
                SyntaxErrorKind::InconsistentIndentation,
                line_start,
                "indentation mixes tabs and spaces inconsistently with the enclosing block",
            ));
        }
    }

    fn comment(&mut self) {
        let line = self.line;
        self.bump();
        let mut text = String::new();
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            text.push(c);
            self.bump();
        }
        self.comments.push(Comment { line, text: text.trim().to_string() });
    }

    fn number(&mut self, span: Span) -> Result<(), SyntaxError> {
        let mut text = String::new();
        let mut is_float = false;
        let take_digits = |lx: &mut Self, text: &mut String| {
            while let Some(c) = lx.peek(0) {
                if c.is_ascii_digit() {
                    text.push(c);
                } else if c != '_' {
                    break;
                }
                lx.bump();
            }
        };
        take_digits(self, &mut text);
        if self.peek(0) == Some('.') {
            is_float = true;
            text.push('.');
            self.bump();
            take_digits(self, &mut text);
        }
        if let Some('e' | 'E') = self.peek(0) {
            let sign = self.peek(1);
            let digit_at = if matches!(sign, Some('+' | '-')) { 2 } else { 1 };
            if self.peek(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                text.push('e');
                self.bump();
                if digit_at == 2 {
                    text.push(self.bump().expect("sign"));
                }
                take_digits(self, &mut text);
            }
        }
        if self.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
            return Err(self.err(SyntaxErrorKind::Syntax, span, "invalid numeric literal"));
        }
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.err(SyntaxErrorKind::Syntax, span, "invalid float literal"))?;
            self.push(Tok::Float(v), span);
        } else {
            let v: i64 = text
                .parse()
                .map_err(|_| self.err(SyntaxErrorKind::Syntax, span, format!("integer literal {text} is too large")))?;
            self.push(Tok::Int(v), span);
        }
        Ok(())
    }

    fn word(&mut self, span: Span) -> Result<(), SyntaxError> {
        let mut w = String::new();
        while let Some(c) = self.peek(0) {
            if c == '_' || c.is_alphanumeric() {
                w.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if let Some(q @ ('"' | '\'')) = self.peek(0) {
            match w.to_ascii_lowercase().as_str() {
                "r" => {
                    let s = self.string(span, true)?;
                    self.push(Tok::Str(s), span);
                    return Ok(());
                }
                "f" | "rf" | "fr" => {
                    return Err(self.err(SyntaxErrorKind::ForbiddenConstruct, span, "f-strings are not supported"))
                }
                "b" | "rb" | "br" | "u" => {
                    return Err(self.err(
                        SyntaxErrorKind::ForbiddenConstruct,
                        span,
                        format!("string prefix '{w}' before {q} is not supported"),
                    ))
                }
                _ => {}
            }
        }
        let tok = match w.as_str() {
            "def" => Tok::Def,
            "return" => Tok::Return,
            "for" => Tok::For,
            "in" => Tok::In,
            "if" => Tok::If,
            "elif" => Tok::Elif,
            "else" => Tok::Else,
            "and" => Tok::And,
            "or" => Tok::Or,
            "not" => Tok::Not,
            "True" => Tok::True,
            "False" => Tok::False,
            "None" => Tok::None,
            other => match FORBIDDEN_KEYWORDS.iter().find(|k| **k == other) {
                Some(k) => Tok::Forbidden(k),
                None => Tok::Name(w),
            },
        };
        self.push(tok, span);
        Ok(())
    }

    fn string(&mut self, span: Span, raw: bool) -> Result<String, SyntaxError> {
        let quote = self.bump().expect("quote");
        let triple = self.peek(0) == Some(quote) && self.peek(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(SyntaxErrorKind::UnterminatedString, span, "string literal is never closed"));
            };
            if c == quote {
                if !triple {
                    return Ok(out);
                }
                if self.peek(0) == Some(quote) && self.peek(1) == Some(quote) {
                    self.bump();
                    self.bump();
                    return Ok(out);
                }
                out.push(c);
                continue;
            }
            if c == '\n' && !triple {
                return Err(self.err(SyntaxErrorKind::UnterminatedString, span, "string literal is never closed"));
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let Some(e) = self.bump() else {
                return Err(self.err(SyntaxErrorKind::UnterminatedString, span, "string literal is never closed"));
            };
            if raw {
                out.push('\\');
                out.push(e);
                continue;
            }
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                '\\' => out.push('\\'),
                '\'' => out.push('\''),
                '"' => out.push('"'),
                '\n' => {}
                'u' => {
                    let mut hex = String::new();
                    for _ in 0..4 {
                        hex.extend(self.bump());
                    }
                    let ch = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32).ok_or_else(|| {
                        self.err(SyntaxErrorKind::Syntax, span, format!("invalid unicode escape \\u{hex}"))
                    })?;
                    out.push(ch);
                }
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
        }
    }

    fn operator(&mut self, span: Span) -> Result<(), SyntaxError> {
        for op in OPERATORS {
            let n = op.chars().count();
            if (0..n).all(|i| self.peek(i) == op.chars().nth(i)) {
                for _ in 0..n {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => self.depth.push((op.chars().next().unwrap(), span)),
                    ")" | "]" | "}" => {
                        let want = match *op {
                            ")" => '(',
                            "]" => '[',
                            _ => '{',
                        };
                        match self.depth.pop() {
                            Some((open, _)) if open == want => {}
                            Some((open, _)) => {
                                return Err(self.err(
                                    SyntaxErrorKind::Syntax,
                                    span,
                                    format!("closing '{op}' does not match opening '{open}'"),
                                ))
                            }
                            None => return Err(self.err(SyntaxErrorKind::Syntax, span, format!("unmatched '{op}'"))),
                        }
                    }
                    _ => {}
                }
                self.push(Tok::Op(op), span);
                return Ok(());
            }
        }
        let c = self.peek(0).unwrap_or('\0');
        Err(self.err(SyntaxErrorKind::IllegalCharacter, span, format!("illegal character {c:?}")))
    }
}
