//! Parallel batch runs with a resumable results log.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use spatial_agent::{run_query, AgentConfig, AnswerStage, ChatClient, Choice, Stage, StageTimings};
use spatial_lang::{BundleDir, BundleProvider, RemoteService};
use thiserror::Error;

use crate::dataset::BenchItem;
use crate::report::BenchReport;
use crate::score::score_item;

/// One line of the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub id: String,
    pub prediction: Option<Choice>,
    pub answer_stage: Option<AnswerStage>,
    /// 0 or 1, or the relative accuracy for numeric-other items.
    pub score: Option<f64>,
    pub failure: Option<Stage>,
    pub failure_message: Option<String>,
    pub timings: StageTimings,
}

/// Produces a result for one item. Never fails; problems become tags.
pub trait ItemRunner: Sync {
    fn run(&self, item: &BenchItem) -> BenchResult;
}

impl<F: Fn(&BenchItem) -> BenchResult + Sync> ItemRunner for F {
    fn run(&self, item: &BenchItem) -> BenchResult {
        self(item)
    }
}

/// Where each item's reconstruction comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BundleSource {
    /// Precomputed bundles in `<root>/<item id>`.
    Root(PathBuf),
    Remote { endpoint: String, timeout: Duration },
}

/// The full agent pipeline.
pub struct PipelineRunner {
    pub client: Arc<dyn ChatClient>,
    pub config: AgentConfig,
    pub bundles: BundleSource,
}

impl ItemRunner for PipelineRunner {
    fn run(&self, item: &BenchItem) -> BenchResult {
        let scene = match item.scene() {
            Ok(s) => s,
            Err(e) => {
                return BenchResult {
                    id: item.id.clone(),
                    prediction: None,
                    answer_stage: None,
                    score: score_item(item, None),
                    failure: Some(Stage::Reconstruction),
                    failure_message: Some(e.to_string()),
                    timings: StageTimings::default(),
                }
            }
        };
        let provider: Box<dyn BundleProvider> = match &self.bundles {
            BundleSource::Root(root) => Box::new(BundleDir(root.join(&item.id))),
            BundleSource::Remote { endpoint, timeout } => {
                Box::new(RemoteService { endpoint: endpoint.clone(), timeout: *timeout })
            }
        };
        let space = item.answer_space();
        let outcome = run_query(&scene, &space, provider.as_ref(), self.client.as_ref(), &self.config);
        BenchResult {
            id: item.id.clone(),
            score: score_item(item, Some(&outcome.answer.choice)),
            prediction: Some(outcome.answer.choice),
            answer_stage: Some(outcome.answer.stage),
            failure: outcome.failure.as_ref().map(|f| f.stage),
            failure_message: outcome.failure.map(|f| f.message),
            timings: outcome.timings,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub parallelism: usize,
    pub results_path: PathBuf,
    /// Keep results already in the log and skip those items.
    pub resume: bool,
    /// Stop after this many new items.
    pub limit: Option<usize>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("results log {}: {source}", path.display())]
    Log { path: PathBuf, source: std::io::Error },
    #[error("{missing} of {total} items have no result yet")]
    Incomplete { missing: usize, total: usize },
    #[error(transparent)]
    Score(#[from] crate::score::ScoreError),
}

/// Reads a results log, dropping malformed lines such as a partial final
/// write. Later duplicates of an id are ignored.
pub fn read_results(path: &Path) -> std::io::Result<Vec<BenchResult>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut seen = HashSet::new();
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<BenchResult>(l).ok())
        .filter(|r| seen.insert(r.id.clone()))
        .collect())
}

fn to_line(r: &BenchResult) -> String {
    serde_json::to_string(r).expect("results serialize") + "\n"
}

/// Runs every item not yet in the log, appending results as they finish,
/// then scores the whole log against `items`.
pub fn run_bench(items: &[BenchItem], runner: &dyn ItemRunner, options: &RunOptions) -> Result<BenchReport, BenchError> {
    if options.parallelism == 0 {
        return Err(BenchError::Parallelism);
    }
    let mut ids = HashSet::new();
    for item in items {
        if !ids.insert(item.id.as_str()) {
            return Err(BenchError::DuplicateId(item.id.clone()));
        }
    }
    let path = &options.results_path;
    let log_err = |source| BenchError::Log { path: path.clone(), source };
    let start = Instant::now();
    let previous = if options.resume { read_results(path).map_err(log_err)? } else { Vec::new() };
    let previous: Vec<BenchResult> = previous.into_iter().filter(|r| ids.contains(r.id.as_str())).collect();
    let done: HashSet<String> = previous.iter().map(|r| r.id.clone()).collect();

    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(log_err)?;
    }
    // Rewrite the surviving prefix so a torn last line cannot linger.
    let mut file = File::create(path).map_err(log_err)?;
    for r in &previous {
        file.write_all(to_line(r).as_bytes()).map_err(log_err)?;
    }
    file.sync_data().map_err(log_err)?;
    drop(file);

    let mut todo: Vec<&BenchItem> = items.iter().filter(|i| !done.contains(&i.id)).collect();
    if let Some(limit) = options.limit {
        todo.truncate(limit);
    }
    let mut writer = BufWriter::new(OpenOptions::new().append(true).open(path).map_err(log_err)?);
    let next = AtomicUsize::new(0);
    let workers = options.parallelism.min(todo.len());
    let write_result = thread::scope(|s| -> Result<(), BenchError> {
        let (tx, rx) = mpsc::channel::<BenchResult>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (todo, next) = (&todo, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = todo.get(i) else { break };
                let result = runner.run(item);
                tracing::info!(id = %item.id, failure = ?result.failure, "item finished");
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            writer.write_all(to_line(&result).as_bytes()).map_err(log_err)?;
            writer.flush().map_err(log_err)?;
        }
        Ok(())
    });
    write_result?;
    drop(writer);

    let results = read_results(path).map_err(log_err)?;
    let by_id: BTreeMap<&str, &BenchResult> = results.iter().map(|r| (r.id.as_str(), r)).collect();
    let aligned: Vec<BenchResult> = items.iter().filter_map(|i| by_id.get(i.id.as_str()).map(|r| (*r).clone())).collect();
    if aligned.len() != items.len() {
        return Err(BenchError::Incomplete { missing: items.len() - aligned.len(), total: items.len() });
    }
    let mut report = BenchReport::from_results(&aligned, items)?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
