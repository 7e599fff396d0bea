//! A ten-item camera-motion benchmark built from synthetic scenes, with an
//! oracle chat client that solves it from the program output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};

use nalgebra::Vector3;
use regex::Regex;
use serde_json::json;
use spatial_agent::prompts::ANSWER_PROMPT;
use spatial_agent::{AgentConfig, ClientError, RecordingClient, ScriptedClient};
use spatial_core::geometry::{camera_center, ExtrinsicPose, MotionLabel};
use spatial_core::recon::save_bundle;
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, Trajectory, TrajectoryPattern};
use spatial_lang::samples;
use thiserror::Error;

use crate::dataset::{load_dataset, DatasetFormat};
use crate::runner::{run_bench, BundleSource, PipelineRunner, RunOptions};

pub const MINI_ITEMS: usize = 10;
const WIDTH: u32 = 96;
const HEIGHT: u32 = 72;
const STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBenchmark {
    pub dataset: PathBuf,
    pub images_root: PathBuf,
    pub bundles_root: PathBuf,
    /// Recorded oracle replies for the mock client.
    pub fixtures: PathBuf,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture generation: {0}")]
    Generate(String),
}

pub fn option_text(label: MotionLabel) -> &'static str {
    match label {
        MotionLabel::Forward => "Directly forward",
        MotionLabel::ForwardRight => "Diagonally forward and right",
        MotionLabel::Right => "Directly right",
        MotionLabel::BackwardRight => "Diagonally backward and right",
        MotionLabel::Backward => "Directly backward",
        MotionLabel::BackwardLeft => "Diagonally backward and left",
        MotionLabel::Left => "Directly left",
        MotionLabel::ForwardLeft => "Diagonally forward and left",
        MotionLabel::Negligible => "I did not move",
    }
}

pub const QUESTION_STEM: &str =
    "Based on these two views showing the same scene: in which direction did I move from the first view to the second view?";

struct ItemSpec {
    id: String,
    sector: usize,
    offset_deg: f64,
    yaw_deg: f64,
}

fn item_specs() -> Vec<ItemSpec> {
    let groups = [("rotation", 3), ("among", 4), ("around", 3)];
    let mut specs = Vec::new();
    for (group, count) in groups {
        for k in 0..count {
            let n = specs.len();
            specs.push(ItemSpec {
                id: format!("{group}_{k:02}"),
                sector: (n * 3) % 8,
                offset_deg: [-12.0, 0.0, 9.0][n % 3],
                yaw_deg: -40.0 + 11.0 * n as f64,
            });
        }
    }
    specs
}

/// Writes images, bundles, a mindcube-format dataset and recorded oracle
/// replies under `dir`.
pub fn write_mini_benchmark(dir: &Path) -> Result<MiniBenchmark, FixtureError> {
    let images_root = dir.join("images");
    let bundles_root = dir.join("bundles");
    fs::create_dir_all(&images_root)?;
    fs::create_dir_all(&bundles_root)?;
    let mut lines = String::new();
    for (n, spec) in item_specs().iter().enumerate() {
        let label = MotionLabel::SECTORS[spec.sector];
        let first = ExtrinsicPose::level(spec.yaw_deg, Vector3::new(-0.3, 0.0, 0.2));
        let heading = (45.0 * spec.sector as f64 + spec.offset_deg).to_radians();
        let local = Vector3::new(heading.sin(), 0.0, heading.cos()) * STEP;
        let second = ExtrinsicPose::level(spec.yaw_deg + 15.0, camera_center(&first) + first.rotation().transpose() * local);
        let mut scene = SyntheticSceneSpec::desk(WIDTH, HEIGHT, TrajectoryPattern::Approach { step: 0.1, count: 1 });
        scene.trajectory = Trajectory::Poses(vec![first, second]);
        let (bundle, _) = synthesize_scene(&scene).map_err(|e| FixtureError::Generate(e.to_string()))?;
        save_bundle(&bundle, &bundles_root.join(&spec.id)).map_err(|e| FixtureError::Generate(e.to_string()))?;

        let item_dir = images_root.join(&spec.id);
        fs::create_dir_all(&item_dir)?;
        let mut rel = Vec::new();
        for (i, frame) in bundle.frames().iter().enumerate() {
            let name = format!("view_{}.png", i + 1);
            frame.image.save(item_dir.join(&name)).map_err(|e| FixtureError::Generate(e.to_string()))?;
            rel.push(format!("{}/{name}", spec.id));
        }

        // The correct label and three distractors, rotated by item index.
        let mut labels: Vec<MotionLabel> = [0, 2, 4, 6].iter().map(|d| MotionLabel::SECTORS[(spec.sector + d) % 8]).collect();
        labels.rotate_left(n % 4);
        let letters = ['A', 'B', 'C', 'D'];
        let gt = letters[labels.iter().position(|l| *l == label).expect("correct label is offered")];
        let mut question = QUESTION_STEM.to_string();
        for (letter, l) in letters.iter().zip(&labels) {
            question.push_str(&format!("\n{letter}. {}", option_text(*l)));
        }
        let setting = spec.id.split('_').next().expect("id has a group prefix");
        let record = json!({"id": spec.id, "question": question, "images": rel, "setting": setting, "gt_answer": gt.to_string()});
        lines.push_str(&record.to_string());
        lines.push('\n');
    }
    let dataset = dir.join("mini.jsonl");
    fs::write(&dataset, lines)?;

    let fixtures = dir.join("mock_responses.jsonl");
    let recorder = Arc::new(RecordingClient::new(oracle_client()));
    let items = load_dataset(&dataset, DatasetFormat::MindCube, &images_root).map_err(|e| FixtureError::Generate(e.to_string()))?;
    let runner = PipelineRunner {
        client: recorder.clone(),
        config: AgentConfig::default(),
        bundles: BundleSource::Root(bundles_root.clone()),
    };
    let scratch = tempfile_path(dir);
    let options = RunOptions { parallelism: 1, results_path: scratch.clone(), resume: false, limit: None };
    run_bench(&items, &runner, &options).map_err(|e| FixtureError::Generate(e.to_string()))?;
    fs::remove_file(&scratch)?;
    recorder.save(&fixtures)?;
    Ok(MiniBenchmark { dataset, images_root, bundles_root, fixtures })
}

fn tempfile_path(dir: &Path) -> PathBuf {
    dir.join(".recording_results.jsonl")
}

static MOVED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Visual clue: .*?moved ([a-z-]+)").unwrap());

/// Writes the camera-motion program, then answers by matching the motion
/// named in the clue against the options. Guesses `A` without a clue.
pub fn oracle_client() -> ScriptedClient {
    ScriptedClient::from_fn(|req| {
        let text = req.text();
        if !text.contains(ANSWER_PROMPT) {
            if text.contains("Question:") && text.contains("def program") {
                return Ok(format!(
                    "The camera extrinsics answer this directly, so I describe the camera motion.\n```python\n{}```\n",
                    samples::CAMERA_MOTION
                ));
            }
            return Ok("A".into());
        }
        let label = MOVED
            .captures(&text)
            .and_then(|c| MotionLabel::SECTORS.into_iter().find(|l| l.as_str() == &c[1]))
            .ok_or_else(|| ClientError::BadResponse("oracle found no motion in the clue".into()))?;
        let wanted = option_text(label);
        let letter = text
            .lines()
            .find_map(|l| l.strip_suffix(wanted).and_then(|p| p.strip_suffix(". ")).filter(|p| p.len() == 1))
            .ok_or_else(|| ClientError::BadResponse(format!("oracle found no option {wanted:?}")))?;
        Ok(format!("The clue says I moved {}. The answer is {letter}.", label.as_str()))
    })
}
