//! Benchmark ingestion, scoring and batch runs over the agent pipeline.

pub mod dataset;
pub mod fixture;
pub mod report;
pub mod runner;
pub mod score;

pub use dataset::{load_dataset, split_options, AnswerType, BenchItem, Category, DatasetError, DatasetFormat, Truth};
pub use report::BenchReport;
pub use runner::{read_results, run_bench, BenchError, BenchResult, BundleSource, ItemRunner, PipelineRunner, RunOptions};
pub use score::{mra_thresholds, score_accuracy, score_item, score_mra, ScoreError, Scores, MRA_THRESHOLDS_PERCENT};
