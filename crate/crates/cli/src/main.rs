mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use spatial_agent::{
    run_query, AgentConfig, AnswerSpace, ChatClient, HttpClient, HttpClientConfig, MockClient, RecordingClient,
};
use spatial_bench::fixture::write_mini_benchmark;
use spatial_bench::{load_dataset, run_bench, split_options, BundleSource, DatasetFormat, PipelineRunner, RunOptions};
use spatial_core::geometry::{
    build_point_cloud, describe_camera_motion, move_backward, move_forward, rotate_left, rotate_right, turn_around,
    ExtrinsicPose, PointCloudOptions, DEFAULT_MOVE_DISTANCE, DEFAULT_ROTATION_DEG,
};
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, TrajectoryPattern};
use spatial_core::recon::{load_bundle, reconstruct_remote, save_bundle, ReconstructionBundle};
use spatial_core::render::{synthesize_novel_view, RenderOptions, DEFAULT_NEAR_CLIP, DEFAULT_POINT_RADIUS};
use spatial_core::scene::{expand_image_paths, Scene};
use spatial_core::SceneUnits;
use spatial_lang::{
    execute, parse_program, trace_to_jsonl, BundleProvider, ExecutionLimits, FixedBundle, OutputPayload,
    RemoteService, ToolConfig,
};

const AFTER_HELP: &str = "Poses follow the +x right, +y down, +z forward camera convention. Rotations are in \
degrees about the camera's vertical axis (default 45), movement is in scene units along the viewing direction \
(default 0.3). Scene units are meters for metric bundles and unitless for normalized ones.\n\n\
Exit status: 0 on success, 1 when the command fails, 2 on invalid usage.";

#[derive(Parser, Debug)]
#[command(name = "spatial", version, about = "Spatial reasoning over multi-view images", after_help = AFTER_HELP)]
struct Cli {
    /// TOML file with one [subcommand] table of flag = value pairs.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More logging on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a reconstruction bundle from images, a service or a synthetic scene.
    #[command(after_help = AFTER_HELP)]
    Reconstruct(ReconstructArgs),
    /// Print the egocentric camera motion between consecutive views.
    #[command(name = "describe-motion", after_help = AFTER_HELP)]
    DescribeMotion(DescribeArgs),
    /// Render the point cloud from a view after a sequence of pose edits.
    #[command(after_help = AFTER_HELP)]
    Render(RenderArgs),
    /// Run a program against a scene and print its output and trace.
    #[command(name = "run-program", after_help = AFTER_HELP)]
    RunProgram(RunProgramArgs),
    /// Answer one question with the full two-stage pipeline.
    #[command(after_help = AFTER_HELP)]
    Ask(AskArgs),
    /// Run a benchmark dataset and write a report.
    #[command(after_help = AFTER_HELP)]
    Bench(BenchArgs),
    /// Write the ten-item synthetic benchmark with recorded mock replies.
    #[command(after_help = AFTER_HELP)]
    Fixture(FixtureArgs),
}

const SUBCOMMANDS: [&str; 7] = ["reconstruct", "describe-motion", "render", "run-program", "ask", "bench", "fixture"];

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Backend {
    /// Validate an existing bundle directory and write it canonically.
    File,
    /// POST the images to a reconstruction service.
    Http,
    /// Generate an analytic scene.
    Synthetic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TrajectoryName {
    Orbit,
    Lateral,
    Approach,
    EightSector,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Units {
    Normalized,
    Metric,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Image files or directories (png, jpg, jpeg; directories sorted by name).
    #[arg(long, num_args = 1.., value_name = "PATH")]
    images: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "synthetic")]
    backend: Backend,
    /// Service base URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Input bundle for the file backend.
    #[arg(long, value_name = "DIR")]
    bundle: Option<PathBuf>,
    /// Camera path for the synthetic backend.
    #[arg(long, value_enum, default_value = "orbit")]
    trajectory: TrajectoryName,
    /// Number of synthetic views (orbit, lateral, approach).
    #[arg(long, default_value_t = 4)]
    views: usize,
    /// Distance between synthetic views in scene units, or the orbit radius.
    #[arg(long, default_value_t = 0.4)]
    step: f64,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 192)]
    height: u32,
    /// Scale tag of the synthetic bundle.
    #[arg(long, value_enum, default_value = "normalized")]
    units: Units,
    /// Request timeout for the http backend, in seconds.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Output bundle directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DescribeArgs {
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    /// Frame whose pose starts the edit sequence.
    #[arg(long, default_value_t = 0)]
    pose_from: usize,
    /// Turn right by N degrees (default 45). Edits apply in command-line order.
    #[arg(long, value_name = "DEG", num_args = 0..=1, default_missing_value = "45", allow_negative_numbers = true)]
    rotate_right: Vec<f64>,
    /// Turn left by N degrees (default 45).
    #[arg(long, value_name = "DEG", num_args = 0..=1, default_missing_value = "45", allow_negative_numbers = true)]
    rotate_left: Vec<f64>,
    /// Step forward by D scene units (default 0.3).
    #[arg(long, value_name = "D", num_args = 0..=1, default_missing_value = "0.3")]
    move_forward: Vec<f64>,
    /// Step backward by D scene units (default 0.3).
    #[arg(long, value_name = "D", num_args = 0..=1, default_missing_value = "0.3")]
    move_backward: Vec<f64>,
    /// Turn 180 degrees in place.
    #[arg(long, action = clap::ArgAction::Count)]
    turn_around: u8,
    /// Output size; the bundle resolution by default.
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Half-size of each splat in pixels.
    #[arg(long, default_value_t = DEFAULT_POINT_RADIUS)]
    point_radius: u32,
    /// Skip points with confidence below this value.
    #[arg(long, default_value_t = 0.0)]
    min_confidence: f32,
    /// Output PNG file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct LimitArgs {
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    #[arg(long, default_value_t = 32)]
    max_rendered_images: u32,
    #[arg(long, default_value_t = 10_000)]
    max_loop_iterations: u64,
    /// Wall-clock budget per program, in seconds.
    #[arg(long, default_value_t = 30.0)]
    wall_clock: f64,
    /// Default turn for rotate_right/rotate_left, in degrees.
    #[arg(long, default_value_t = DEFAULT_ROTATION_DEG)]
    rotation_deg: f64,
    /// Default step for move_forward/move_backward, in scene units.
    #[arg(long, default_value_t = DEFAULT_MOVE_DISTANCE)]
    move_distance: f64,
}

impl LimitArgs {
    fn limits(&self) -> Result<ExecutionLimits> {
        if !(self.wall_clock.is_finite() && self.wall_clock > 0.0) {
            bail!("--wall-clock must be a positive number of seconds");
        }
        let limits = ExecutionLimits {
            max_steps: self.max_steps,
            max_rendered_images: self.max_rendered_images,
            max_loop_iterations: self.max_loop_iterations,
            wall_clock_budget: Duration::from_secs_f64(self.wall_clock),
        };
        limits.validate()?;
        Ok(limits)
    }

    fn tools(&self) -> Result<ToolConfig> {
        if !self.rotation_deg.is_finite() || !(self.move_distance.is_finite() && self.move_distance >= 0.0) {
            bail!("--rotation-deg must be finite and --move-distance finite and non-negative");
        }
        Ok(ToolConfig { rotation_deg: self.rotation_deg, move_distance: self.move_distance, ..ToolConfig::default() })
    }
}

#[derive(Args, Debug)]
struct RunProgramArgs {
    /// Program source file.
    program: PathBuf,
    /// Precomputed bundle; otherwise --endpoint is used.
    #[arg(long, value_name = "DIR")]
    bundle: Option<PathBuf>,
    /// Reconstruction service for scenes without a bundle.
    #[arg(long)]
    endpoint: Option<String>,
    /// Scene images; the bundle's own frames when omitted.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    images: Vec<PathBuf>,
    #[arg(long, default_value = "")]
    question: String,
    /// Directory for image outputs.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Model for both stages unless overridden.
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    #[arg(long)]
    answer_model: Option<String>,
    /// In-context examples in the code prompt: 0, 2 or 4.
    #[arg(long, default_value_t = 2)]
    examples: usize,
    /// Extra code-generation attempts after an unusable reply.
    #[arg(long, default_value_t = 2)]
    retries: u32,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Replay recorded replies instead of calling a model.
    #[arg(long, value_name = "FILE")]
    mock: Option<PathBuf>,
    /// Record every exchange to this fixture file.
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
    /// Chat-completion base URL; OPENAI_BASE_URL overrides the default.
    #[arg(long)]
    base_url: Option<String>,
    #[command(flatten)]
    limits: LimitArgs,
}

impl ModelArgs {
    fn agent_config(&self) -> Result<AgentConfig> {
        let config = AgentConfig {
            codegen_model: self.model.clone(),
            answer_model: self.answer_model.clone().unwrap_or_else(|| self.model.clone()),
            example_count: self.examples,
            retry_budget: self.retries,
            temperature: self.temperature,
            limits: self.limits.limits()?,
            tools: self.limits.tools()?,
            ..AgentConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    fn client(&self) -> Result<Arc<dyn ChatClient>> {
        if let Some(path) = &self.mock {
            return Ok(Arc::new(MockClient::from_path(path)?));
        }
        let mut http = HttpClientConfig::default().with_env();
        if let Some(url) = &self.base_url {
            http.base_url = url.clone();
        }
        if http.api_key.is_none() {
            tracing::warn!("no API key set in OPENAI_API_KEY");
        }
        Ok(Arc::new(HttpClient::new(http)?))
    }
}

#[derive(Args, Debug)]
struct AskArgs {
    #[arg(long, num_args = 1.., value_name = "PATH", required = true)]
    images: Vec<PathBuf>,
    /// The question, with options on lines starting "A.", "B.", ...
    #[arg(long)]
    question: String,
    /// Expect a number rather than an option letter.
    #[arg(long)]
    numeric: bool,
    #[arg(long, value_name = "DIR")]
    bundle: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Where to write the program trace.
    #[arg(long, value_name = "FILE", default_value = "trace.jsonl")]
    trace_out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormatArg {
    Mindcube,
    Omni3d,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "mindcube")]
    format: FormatArg,
    /// Directory that relative image paths resolve against.
    #[arg(long, value_name = "DIR")]
    images_root: PathBuf,
    /// Precomputed bundles, one directory per item id.
    #[arg(long, value_name = "DIR")]
    bundles_root: Option<PathBuf>,
    /// Reconstruct each item through this service instead.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Report JSON; the results log sits next to it unless --results is set.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_name = "FILE")]
    results: Option<PathBuf>,
    /// Keep finished items from the results log.
    #[arg(long)]
    resume: bool,
    /// Stop after this many new items.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn load(dir: &Path) -> Result<ReconstructionBundle> {
    load_bundle(dir).with_context(|| format!("cannot load bundle {}", dir.display()))
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<()> {
    let bundle = match args.backend {
        Backend::File => {
            let Some(dir) = &args.bundle else { bail!("--backend file needs --bundle DIR") };
            load(dir)?
        }
        Backend::Http => {
            let Some(endpoint) = &args.endpoint else { bail!("--backend http needs --endpoint URL") };
            if args.images.is_empty() {
                bail!("--backend http needs --images");
            }
            let paths = expand_image_paths(&args.images)?;
            reconstruct_remote(&paths, endpoint, Duration::from_secs_f64(args.timeout))?
        }
        Backend::Synthetic => {
            let n = args.views;
            let pattern = match args.trajectory {
                TrajectoryName::Orbit => TrajectoryPattern::Orbit { radius: args.step, count: n },
                TrajectoryName::Lateral => TrajectoryPattern::Lateral { step: args.step, count: n },
                TrajectoryName::Approach => TrajectoryPattern::Approach { step: args.step, count: n },
                TrajectoryName::EightSector => TrajectoryPattern::EightSector { step: args.step, offset_deg: 0.0 },
            };
            let mut spec = SyntheticSceneSpec::desk(args.width, args.height, pattern);
            spec.units = match args.units {
                Units::Normalized => SceneUnits::Normalized,
                Units::Metric => SceneUnits::MetricMeters,
            };
            synthesize_scene(&spec)?.0
        }
    };
    save_bundle(&bundle, &args.out).with_context(|| format!("cannot write bundle {}", args.out.display()))?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_describe(args: &DescribeArgs) -> Result<()> {
    let bundle = load(&args.bundle)?;
    println!("{}", describe_camera_motion(&bundle.poses(), bundle.units())?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PoseEdit {
    RotateRight(f64),
    RotateLeft(f64),
    MoveForward(f64),
    MoveBackward(f64),
    TurnAround,
}

/// Pose edits in the order their flags appeared.
fn pose_edits(m: &ArgMatches) -> Vec<PoseEdit> {
    let mut edits: Vec<(usize, PoseEdit)> = Vec::new();
    let mut collect = |id: &str, make: fn(f64) -> PoseEdit| {
        if let (Some(idx), Some(vals)) = (m.indices_of(id), m.get_many::<f64>(id)) {
            edits.extend(idx.zip(vals).map(|(i, v)| (i, make(*v))));
        }
    };
    collect("rotate_right", PoseEdit::RotateRight);
    collect("rotate_left", PoseEdit::RotateLeft);
    collect("move_forward", PoseEdit::MoveForward);
    collect("move_backward", PoseEdit::MoveBackward);
    if let Some(idx) = m.indices_of("turn_around") {
        edits.extend(idx.map(|i| (i, PoseEdit::TurnAround)));
    }
    edits.sort_by_key(|(i, _)| *i);
    edits.into_iter().map(|(_, e)| e).collect()
}

fn apply_edits(pose: ExtrinsicPose, edits: &[PoseEdit]) -> Result<ExtrinsicPose> {
    edits.iter().try_fold(pose, |p, e| {
        Ok(match *e {
            PoseEdit::RotateRight(d) => rotate_right(&p, d),
            PoseEdit::RotateLeft(d) => rotate_left(&p, d),
            PoseEdit::MoveForward(d) => move_forward(&p, d)?,
            PoseEdit::MoveBackward(d) => move_backward(&p, d)?,
            PoseEdit::TurnAround => turn_around(&p),
        })
    })
}

fn cmd_render(args: &RenderArgs, matches: &ArgMatches) -> Result<()> {
    let bundle = load(&args.bundle)?;
    let Some(frame) = bundle.frames().get(args.pose_from) else {
        bail!("--pose-from {} is out of range for a {}-frame bundle", args.pose_from, bundle.len());
    };
    let pose = apply_edits(frame.pose, &pose_edits(matches))?;
    let cloud = build_point_cloud(&bundle, &PointCloudOptions { confidence_min: args.min_confidence, ..Default::default() })?;
    let k = frame.intrinsics;
    let (width, height) = (args.width.unwrap_or(k.width), args.height.unwrap_or(k.height));
    let k = if (width, height) == (k.width, k.height) { k } else { k.scaled_to(width, height)? };
    let opts = RenderOptions { width, height, point_radius: args.point_radius, near_clip: DEFAULT_NEAR_CLIP, background: [0.0; 3] };
    let image = synthesize_novel_view(&cloud, &pose, &k, &opts)?;
    image.to_rgb8().save(&args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    println!("{}", args.out.display());
    Ok(())
}

fn scene_and_provider(
    images: &[PathBuf],
    question: &str,
    bundle: Option<&Path>,
    endpoint: Option<&str>,
) -> Result<(Scene, Box<dyn BundleProvider>)> {
    match (bundle, endpoint) {
        (Some(dir), _) => {
            let b = Arc::new(load(dir)?);
            let scene = if images.is_empty() { Scene::from_bundle(&b, question) } else { Scene::load(images, question)? };
            Ok((scene, Box::new(FixedBundle(b))))
        }
        (None, Some(url)) => {
            if images.is_empty() {
                bail!("--images is required without --bundle");
            }
            let scene = Scene::load(images, question)?;
            Ok((scene, Box::new(RemoteService { endpoint: url.to_string(), timeout: Duration::from_secs(300) })))
        }
        (None, None) => bail!("give --bundle DIR or --endpoint URL"),
    }
}

fn cmd_run_program(args: &RunProgramArgs) -> Result<()> {
    let source = fs::read_to_string(&args.program).with_context(|| format!("cannot read {}", args.program.display()))?;
    let program = parse_program(&source).map_err(|e| anyhow::anyhow!("{}: {}", args.program.display(), e))?;
    let (scene, provider) = scene_and_provider(&args.images, &args.question, args.bundle.as_deref(), args.endpoint.as_deref())?;
    let output = execute(&program, &scene, provider.as_ref(), &args.limits.limits()?, &args.limits.tools()?).map_err(|e| {
        eprint!("{}", trace_to_jsonl(&e.trace));
        anyhow::anyhow!("{}: {}", args.program.display(), e)
    })?;
    match &output.payload {
        OutputPayload::Text(t) => println!("{t}"),
        payload => {
            fs::create_dir_all(&args.out_dir)?;
            let images: Vec<_> = match payload {
                OutputPayload::Image(i) => vec![i],
                OutputPayload::Images(v) => v.iter().collect(),
                OutputPayload::Text(_) => unreachable!(),
            };
            for (i, img) in images.iter().enumerate() {
                let path = args.out_dir.join(format!("output_{:02}.png", i + 1));
                img.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
                println!("{}", path.display());
            }
        }
    }
    print!("{}", trace_to_jsonl(&output.trace));
    Ok(())
}

fn with_recording(client: Arc<dyn ChatClient>, record: Option<&Path>) -> (Arc<dyn ChatClient>, Option<Arc<RecordingClient<Arc<dyn ChatClient>>>>) {
    match record {
        Some(_) => {
            let r = Arc::new(RecordingClient::new(client));
            (r.clone(), Some(r))
        }
        None => (client, None),
    }
}

fn cmd_ask(args: &AskArgs) -> Result<()> {
    let config = args.model.agent_config()?;
    let (client, recorder) = with_recording(args.model.client()?, args.model.record.as_deref());
    let (scene, provider) = scene_and_provider(&args.images, &args.question, args.bundle.as_deref(), args.endpoint.as_deref())?;
    let options = split_options(&args.question);
    let space = if args.numeric {
        AnswerSpace::Numeric
    } else if options.is_empty() {
        AnswerSpace::Free
    } else {
        AnswerSpace::Options { options }
    };
    let outcome = run_query(&scene, &space, provider.as_ref(), client.as_ref(), &config);
    fs::write(&args.trace_out, trace_to_jsonl(&outcome.trace))
        .with_context(|| format!("cannot write {}", args.trace_out.display()))?;
    if let (Some(r), Some(path)) = (recorder, &args.model.record) {
        r.save(path)?;
    }
    let json = serde_json::json!({
        "answer": outcome.answer.raw,
        "choice": outcome.answer.choice,
        "stage": outcome.answer.stage,
        "program": outcome.program,
        "reasoning": outcome.reasoning,
        "output_kind": outcome.output_kind.map(|k| k.as_str()),
        "output_text": outcome.output_text,
        "rendered_images": outcome.rendered.len(),
        "trace_path": args.trace_out,
        "failure": outcome.failure,
        "timings": outcome.timings,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.parallelism == 0 {
        bail!("--parallelism must be at least 1");
    }
    let config = args.model.agent_config()?;
    let format = match args.format {
        FormatArg::Mindcube => DatasetFormat::MindCube,
        FormatArg::Omni3d => DatasetFormat::Omni3d,
    };
    let items = load_dataset(&args.dataset, format, &args.images_root)?;
    let bundles = match (&args.bundles_root, &args.endpoint) {
        (Some(root), _) => BundleSource::Root(root.clone()),
        (None, Some(url)) => BundleSource::Remote { endpoint: url.clone(), timeout: Duration::from_secs(300) },
        (None, None) => bail!("give --bundles-root DIR or --endpoint URL"),
    };
    let (client, recorder) = with_recording(args.model.client()?, args.model.record.as_deref());
    let runner = PipelineRunner { client, config, bundles };
    let results_path = args.results.clone().unwrap_or_else(|| args.out.with_extension("results.jsonl"));
    let options = RunOptions { parallelism: args.parallelism, results_path, resume: args.resume, limit: args.limit };
    let report = run_bench(&items, &runner, &options);
    if let (Some(r), Some(path)) = (recorder, &args.model.record) {
        r.save(path)?;
    }
    let report = report?;
    fs::write(&args.out, report.to_json()).with_context(|| format!("cannot write {}", args.out.display()))?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_fixture(args: &FixtureArgs) -> Result<()> {
    let mini = write_mini_benchmark(&args.out)?;
    let json = serde_json::json!({
        "dataset": mini.dataset,
        "images_root": mini.images_root,
        "bundles_root": mini.bundles_root,
        "mock": mini.fixtures,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("SPATIAL_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn args_with_config() -> Result<Vec<OsString>> {
    let args: Vec<OsString> = std::env::args_os().collect();
    match config::locate(&args, &SUBCOMMANDS) {
        (Some(path), Some(sub)) => config::overlay(args, &sub, &config::load(&path)?),
        _ => Ok(args),
    }
}

fn main() -> ExitCode {
    let args = match args_with_config() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::DescribeMotion(a) => cmd_describe(a),
        Command::Render(a) => cmd_render(a, matches.subcommand_matches("render").expect("render matches")),
        Command::RunProgram(a) => cmd_run_program(a),
        Command::Ask(a) => cmd_ask(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Fixture(a) => cmd_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn pose_edits_follow_flag_order() {
        let m = Cli::command().get_matches_from([
            "spatial", "render", "--bundle", "b", "--out", "o.png", "--move-forward", "--turn-around", "--rotate-right",
            "90", "--move-forward", "1.5", "--rotate-left",
        ]);
        let edits = pose_edits(m.subcommand_matches("render").unwrap());
        assert_eq!(
            edits,
            vec![
                PoseEdit::MoveForward(0.3),
                PoseEdit::TurnAround,
                PoseEdit::RotateRight(90.0),
                PoseEdit::MoveForward(1.5),
                PoseEdit::RotateLeft(45.0),
            ]
        );
    }

    #[test]
    fn help_documents_defaults() {
        let help = Cli::command().find_subcommand_mut("render").unwrap().render_long_help().to_string();
        assert!(help.contains("default 45") && help.contains("default 0.3"), "{help}");
    }
}
