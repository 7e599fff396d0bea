use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use spatial_agent::{Stage, StageTimings};

use crate::dataset::{BenchItem, Category};
use crate::runner::BenchResult;
use crate::score::{mra_thresholds, score_accuracy, ScoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mra_thresholds: Vec<f64>,
    pub items: usize,
    pub overall: Option<f64>,
    pub categories: BTreeMap<Category, f64>,
    pub mra: Option<f64>,
    pub excluded: Vec<String>,
    /// Every stage is listed, including those with no failures.
    pub failures: BTreeMap<Stage, usize>,
    pub failure_total: usize,
    pub mean_timings: StageTimings,
    pub wall_clock_seconds: f64,
}

impl BenchReport {
    /// Scores `results`, which must be aligned with `items`.
    pub fn from_results(results: &[BenchResult], items: &[BenchItem]) -> Result<Self, ScoreError> {
        let scores = score_accuracy(results, items)?;
        let mut failures: BTreeMap<Stage, usize> = Stage::ALL.iter().map(|s| (*s, 0)).collect();
        for stage in results.iter().filter_map(|r| r.failure) {
            *failures.entry(stage).or_default() += 1;
        }
        let n = results.len().max(1) as f64;
        let sum = |f: fn(&StageTimings) -> f64| results.iter().map(|r| f(&r.timings)).sum::<f64>() / n;
        Ok(Self {
            mra_thresholds: mra_thresholds(),
            items: items.len(),
            overall: scores.overall,
            categories: scores.categories,
            mra: scores.mra,
            excluded: scores.excluded,
            failure_total: failures.values().sum(),
            failures,
            mean_timings: StageTimings { codegen: sum(|t| t.codegen), execution: sum(|t| t.execution), answer: sum(|t| t.answer) },
            wall_clock_seconds: 0.0,
        })
    }

    /// The report with all timing fields zeroed.
    pub fn without_timings(&self) -> Self {
        Self { mean_timings: StageTimings::default(), wall_clock_seconds: 0.0, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Accuracy table in percent, `-` for categories without items.
    pub fn table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", x * 100.0));
        let mut cols = vec![("Overall", pct(self.overall))];
        for c in [Category::Rotation, Category::Among, Category::Around] {
            cols.push((c.title(), pct(self.categories.get(&c).copied())));
        }
        if let Some(v) = self.categories.get(&Category::Other) {
            cols.push((Category::Other.title(), pct(Some(*v))));
        }
        if self.mra.is_some() {
            cols.push(("MRA", pct(self.mra)));
        }
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let mut out = String::new();
        let row = |out: &mut String, cells: Vec<&str>| {
            let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!(" {c:>w$} ")).collect();
            writeln!(out, "|{}|", line.join("|")).unwrap();
        };
        row(&mut out, cols.iter().map(|(h, _)| *h).collect());
        writeln!(out, "|{}|", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")).unwrap();
        row(&mut out, cols.iter().map(|(_, v)| v.as_str()).collect());
        writeln!(out).unwrap();
        writeln!(out, "items: {}  failures: {}", self.items, self.failure_total).unwrap();
        for (stage, count) in &self.failures {
            writeln!(out, "  {:<20} {count}", stage.as_str()).unwrap();
        }
        writeln!(
            out,
            "mean seconds: codegen {:.3}  execution {:.3}  answer {:.3}  (wall clock {:.1})",
            self.mean_timings.codegen, self.mean_timings.execution, self.mean_timings.answer, self.wall_clock_seconds
        )
        .unwrap();
        let thresholds: Vec<String> = self.mra_thresholds.iter().map(|t| format!("{t:.2}")).collect();
        writeln!(out, "MRA thresholds: {}", thresholds.join(" ")).unwrap();
        out
    }
}
