//! A restricted Python subset for composing `pySpatial` tool calls.
//!
//! Source is parsed into a single `def program(scene)` entry function and run
//! by a tree-walking interpreter under explicit budgets.

pub mod ast;
mod error;
pub mod interp;
pub mod lexer;
pub mod output;
pub mod parser;
pub mod pretty;
pub mod samples;
pub mod value;

pub use error::{RuntimeError, RuntimeErrorKind, Span, SyntaxError, SyntaxErrorKind};
pub use interp::{
    classify, execute, BundleDir, BundleProvider, ExecutionLimits, FixedBundle, LimitsError, RemoteService, ToolConfig,
};
pub use output::{trace_from_jsonl, trace_to_jsonl, OutputKind, OutputPayload, ProgramOutput, TraceEntry};
pub use parser::parse_program;
pub use pretty::pretty_print;

use thiserror::Error;

/// Either stage of running source text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("runtime error: {0}")]
    Runtime(#[from] RuntimeError),
}

/// Parses and executes `source` against `scene`.
pub fn run_source(
    source: &str,
    scene: &spatial_core::scene::Scene,
    provider: &dyn BundleProvider,
    limits: &ExecutionLimits,
    tools: &ToolConfig,
) -> Result<ProgramOutput, ProgramError> {
    let program = parse_program(source)?;
    Ok(execute(&program, scene, provider, limits, tools)?)
}
