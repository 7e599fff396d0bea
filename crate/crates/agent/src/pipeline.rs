//! The two-stage query pipeline: generate a program, run it, answer from
//! its output. Any tagged failure falls back to answering from the images.

use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use spatial_core::scene::Scene;
use spatial_lang::ast::Program;
use spatial_lang::{
    execute, parse_program, BundleProvider, ExecutionLimits, OutputKind, ProgramOutput, RuntimeErrorKind, ToolConfig,
    TraceEntry,
};
use thiserror::Error;

use crate::choice::{parse_choice, AnswerSpace, Choice};
use crate::client::{ChatClient, ChatRequest, ClientError, Part};
use crate::extract::extract_program;
use crate::prompts::{
    answer_background, build_codegen_prompt, ANSWER_PROMPT, EXAMPLE_COUNTS, WITHOUT_VISUAL_CLUE_BACKGROUND,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub codegen_model: String,
    pub answer_model: String,
    /// In-context examples in the code-generation prompt: 0, 2 or 4.
    pub example_count: usize,
    /// Extra code-generation attempts after an unusable reply.
    pub retry_budget: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    pub limits: ExecutionLimits,
    pub tools: ToolConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            codegen_model: "gpt-4o".into(),
            answer_model: "gpt-4o".into(),
            example_count: 2,
            retry_budget: 2,
            temperature: 0.0,
            max_tokens: 2048,
            limits: ExecutionLimits::default(),
            tools: ToolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid agent configuration: {0}")]
pub struct ConfigError(pub String);

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !EXAMPLE_COUNTS.contains(&self.example_count) {
            return Err(ConfigError(format!("example count must be one of {EXAMPLE_COUNTS:?}, got {}", self.example_count)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError(format!("temperature {} must be finite and non-negative", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError("max_tokens must be positive".into()));
        }
        self.limits.validate().map_err(|e| ConfigError(e.to_string()))
    }
}

/// Where a query went wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Reconstruction,
    ProgramGeneration,
    Execution,
    Answer,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Reconstruction, Stage::ProgramGeneration, Stage::Execution, Stage::Answer];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Reconstruction => "reconstruction",
            Stage::ProgramGeneration => "program-generation",
            Stage::Execution => "execution",
            Stage::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStage {
    WithClue,
    WithoutClue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub raw: String,
    pub choice: Choice,
    pub stage: AnswerStage,
}

/// Seconds spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub codegen: f64,
    pub execution: f64,
    pub answer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedProgram {
    pub source: String,
    pub reasoning: String,
    pub program: Program,
    /// Requests sent, including the successful one.
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodegenError {
    #[error("no usable program after {attempts} attempt(s): {last}")]
    Unusable { attempts: u32, last: String },
    #[error("code generation request failed: {0}")]
    Client(#[from] ClientError),
}

fn images_of(scene: &Scene) -> Vec<Part> {
    scene.images().iter().map(Part::image).collect()
}

fn request(model: &str, text: String, images: Vec<Part>, config: &AgentConfig, structured: bool) -> ChatRequest {
    let mut parts = vec![Part::Text(text)];
    parts.extend(images);
    ChatRequest {
        model: model.to_string(),
        system: None,
        parts,
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        structured,
    }
}

/// Asks for a program and re-prompts with the located error until one
/// parses or the retry budget is spent.
pub fn generate_program(
    scene: &Scene,
    config: &AgentConfig,
    client: &dyn ChatClient,
) -> Result<GeneratedProgram, CodegenError> {
    let base = build_codegen_prompt(scene.question(), config.example_count);
    let mut prompt = base.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let req = request(&config.codegen_model, prompt.clone(), images_of(scene), config, client.supports_structured());
        let reply = client.send(&req)?;
        let (problem, code) = match extract_program(&reply.text) {
            Ok(extracted) => match parse_program(&extracted.code) {
                Ok(program) => {
                    return Ok(GeneratedProgram {
                        source: extracted.code,
                        reasoning: extracted.reasoning,
                        program,
                        attempts,
                    })
                }
                Err(e) => (e.to_string(), Some(extracted.code)),
            },
            Err(e) => (e.to_string(), None),
        };
        tracing::debug!(attempts, %problem, "generated program unusable");
        if attempts > config.retry_budget {
            return Err(CodegenError::Unusable { attempts, last: problem });
        }
        prompt = format!("{base}\n    Your previous reply could not be used: {problem}\n");
        if let Some(code) = code {
            prompt.push_str(&format!("    Previous code:\n```python\n{code}```\n"));
        }
        prompt.push_str("    Please write the corrected program in a ```python``` block.\n");
    }
}

/// Answers from the program and its output. Text output is inlined,
/// rendered images are attached after the input images.
pub fn answer_with_clue(
    scene: &Scene,
    output: &ProgramOutput,
    program_source: &str,
    space: &AnswerSpace,
    client: &dyn ChatClient,
    config: &AgentConfig,
) -> Result<Answer, ClientError> {
    let mut text = answer_background();
    text.push_str(ANSWER_PROMPT);
    text.push_str(&format!("\n    Question: {}\n\n    Code:\n```python\n{}", scene.question(), program_source));
    if !program_source.ends_with('\n') {
        text.push('\n');
    }
    text.push_str("```\n\n");
    let mut images = images_of(scene);
    match output.text() {
        Some(clue) => text.push_str(&format!("    Visual clue: {clue}\n")),
        None => {
            let rendered = output.images();
            text.push_str(&format!(
                "    Visual clue: {} rendered image(s), attached after the {} input image(s).\n",
                rendered.len(),
                images.len()
            ));
            images.extend(rendered.into_iter().map(Part::image));
        }
    }
    let reply = client.send(&request(&config.answer_model, text, images, config, false))?;
    Ok(Answer { choice: parse_choice(&reply.text, space), raw: reply.text, stage: AnswerStage::WithClue })
}

/// Answers from the question and images alone.
pub fn answer_without_clue(
    scene: &Scene,
    space: &AnswerSpace,
    client: &dyn ChatClient,
    config: &AgentConfig,
) -> Result<Answer, ClientError> {
    let text = format!("{WITHOUT_VISUAL_CLUE_BACKGROUND}\n    Question: {}\n", scene.question());
    let reply = client.send(&request(&config.answer_model, text, images_of(scene), config, false))?;
    Ok(Answer { choice: parse_choice(&reply.text, space), raw: reply.text, stage: AnswerStage::WithoutClue })
}

/// Everything known about one answered query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub answer: Answer,
    pub program: Option<String>,
    pub reasoning: Option<String>,
    pub output_kind: Option<OutputKind>,
    pub output_text: Option<String>,
    pub rendered: Vec<RgbImage>,
    pub trace: Vec<TraceEntry>,
    /// The first thing that went wrong, if anything did.
    pub failure: Option<Failure>,
    pub timings: StageTimings,
    pub codegen_attempts: u32,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs one query end to end. Always returns an answer.
pub fn run_query(
    scene: &Scene,
    space: &AnswerSpace,
    provider: &dyn BundleProvider,
    client: &dyn ChatClient,
    config: &AgentConfig,
) -> QueryOutcome {
    let mut outcome = QueryOutcome {
        answer: Answer { raw: String::new(), choice: Choice::Text(String::new()), stage: AnswerStage::WithoutClue },
        program: None,
        reasoning: None,
        output_kind: None,
        output_text: None,
        rendered: Vec::new(),
        trace: Vec::new(),
        failure: None,
        timings: StageTimings::default(),
        codegen_attempts: 0,
    };
    let fail = |outcome: &mut QueryOutcome, stage: Stage, message: String| {
        tracing::info!(stage = stage.as_str(), %message, "query stage failed");
        outcome.failure.get_or_insert(Failure { stage, message });
    };

    let start = Instant::now();
    let generated = generate_program(scene, config, client);
    outcome.timings.codegen = secs(start.elapsed());

    let mut executed = None;
    match generated {
        Ok(g) => {
            outcome.program = Some(g.source.clone());
            outcome.reasoning = Some(g.reasoning.clone());
            outcome.codegen_attempts = g.attempts;
            let start = Instant::now();
            let result = execute(&g.program, scene, provider, &config.limits, &config.tools);
            outcome.timings.execution = secs(start.elapsed());
            match result {
                Ok(out) => {
                    outcome.output_kind = Some(out.kind());
                    outcome.output_text = out.text().map(str::to_string);
                    outcome.rendered = out.images().into_iter().cloned().collect();
                    outcome.trace = out.trace.clone();
                    executed = Some((g, out));
                }
                Err(e) => {
                    outcome.trace = e.trace.clone();
                    let stage =
                        if e.kind == RuntimeErrorKind::Reconstruction { Stage::Reconstruction } else { Stage::Execution };
                    fail(&mut outcome, stage, e.to_string());
                }
            }
        }
        Err(e) => {
            if let CodegenError::Unusable { attempts, .. } = e {
                outcome.codegen_attempts = attempts;
            }
            fail(&mut outcome, Stage::ProgramGeneration, e.to_string());
        }
    }

    let start = Instant::now();
    let answered = match &executed {
        Some((g, out)) => answer_with_clue(scene, out, &g.source, space, client, config),
        None => answer_without_clue(scene, space, client, config),
    };
    match answered {
        Ok(answer) => {
            if !answer.choice.fits(space) {
                fail(&mut outcome, Stage::Answer, format!("no answer choice in reply {:?}", answer.raw));
            }
            outcome.answer = answer;
        }
        Err(e) => {
            fail(&mut outcome, Stage::Answer, e.to_string());
            if executed.is_some() {
                if let Ok(answer) = answer_without_clue(scene, space, client, config) {
                    outcome.answer = answer;
                }
            }
        }
    }
    outcome.timings.answer = secs(start.elapsed());
    outcome
}
