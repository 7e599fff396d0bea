//! Two-stage spatial question answering: a model writes a `pySpatial`
//! program, the sandbox runs it, and a model answers from the result.

pub mod choice;
pub mod client;
pub mod extract;
pub mod mock;
pub mod openai;
pub mod pipeline;
pub mod prompts;

pub use choice::{parse_choice, AnswerSpace, Choice};
pub use client::{ChatClient, ChatRequest, ChatResponse, ClientError, Part, TokenUsage};
pub use extract::{extract_program, ExtractError, ExtractedProgram};
pub use mock::{FixtureRecord, MockClient, RecordingClient, ScriptedClient};
pub use openai::{HttpClient, HttpClientConfig};
pub use pipeline::{
    answer_with_clue, answer_without_clue, generate_program, run_query, AgentConfig, Answer, AnswerStage, CodegenError,
    ConfigError, Failure, GeneratedProgram, QueryOutcome, Stage, StageTimings,
};
