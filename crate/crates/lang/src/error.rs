use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::output::TraceEntry;

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntaxErrorKind {
    IllegalCharacter,
    InconsistentIndentation,
    UnterminatedString,
    Syntax,
    ForbiddenConstruct,
    EntryFunction,
    UnknownName,
}

impl SyntaxErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntaxErrorKind::IllegalCharacter => "illegal character",
            SyntaxErrorKind::InconsistentIndentation => "inconsistent indentation",
            SyntaxErrorKind::UnterminatedString => "unterminated string",
            SyntaxErrorKind::Syntax => "syntax error",
            SyntaxErrorKind::ForbiddenConstruct => "forbidden construct",
            SyntaxErrorKind::EntryFunction => "entry function error",
            SyntaxErrorKind::UnknownName => "unknown name",
        }
    }
}

/// Lexing, parsing or static-validation failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: {message} at {span}{}", kind.as_str(), hint.as_deref().map(|h| format!(" ({h})")).unwrap_or_default())]
pub struct SyntaxError {
    pub kind: SyntaxErrorKind,
    pub span: Span,
    pub message: String,
    /// e.g. the token the parser expected.
    pub hint: Option<String>,
}

impl SyntaxError {
    pub fn new(kind: SyntaxErrorKind, span: Span, message: impl Into<String>) -> Self {
        Self { kind, span, message: message.into(), hint: None }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeErrorKind {
    UnknownName,
    TypeMismatch,
    IndexOutOfRange,
    ZeroDivision,
    StepLimit,
    ImageBudget,
    WallClock,
    /// A value grew past the interpreter's size cap.
    ValueTooLarge,
    /// The reconstruction backend failed.
    Reconstruction,
    /// A spatial tool rejected its arguments.
    ToolFailure,
}

impl RuntimeErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuntimeErrorKind::UnknownName => "unknown name",
            RuntimeErrorKind::TypeMismatch => "type mismatch",
            RuntimeErrorKind::IndexOutOfRange => "index out of range",
            RuntimeErrorKind::ZeroDivision => "division by zero",
            RuntimeErrorKind::StepLimit => "step limit exceeded",
            RuntimeErrorKind::ImageBudget => "image budget exceeded",
            RuntimeErrorKind::WallClock => "wall-clock budget exceeded",
            RuntimeErrorKind::ValueTooLarge => "value too large",
            RuntimeErrorKind::Reconstruction => "reconstruction failed",
            RuntimeErrorKind::ToolFailure => "tool failure",
        }
    }
}

/// Execution failure with the trace recorded up to that point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: {message} at {span}", kind.as_str())]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub span: Span,
    pub message: String,
    pub trace: Vec<TraceEntry>,
}
