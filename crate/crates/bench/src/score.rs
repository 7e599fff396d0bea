use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use spatial_agent::Choice;
use thiserror::Error;

use crate::dataset::{AnswerType, BenchItem, Category, Truth};
use crate::runner::BenchResult;

/// Relative-accuracy thresholds 0.50, 0.55, ..., 0.95 in hundredths.
pub const MRA_THRESHOLDS_PERCENT: [u32; 10] = [50, 55, 60, 65, 70, 75, 80, 85, 90, 95];

pub fn mra_thresholds() -> Vec<f64> {
    MRA_THRESHOLDS_PERCENT.iter().map(|&p| p as f64 / 100.0).collect()
}

/// Fraction of thresholds θ with |pred − truth| / |truth| < 1 − θ, in
/// tenths. `None` when `truth` is zero or either value is not finite.
pub fn score_mra(prediction: f64, truth: f64) -> Option<f64> {
    if truth == 0.0 || !truth.is_finite() || !prediction.is_finite() {
        return None;
    }
    // |p - t| / |t| < (100 - θ%) / 100, multiplied through to avoid rounding.
    let err = (prediction - truth).abs() * 100.0;
    let satisfied = MRA_THRESHOLDS_PERCENT.iter().filter(|&&p| err < (100 - p) as f64 * truth.abs()).count();
    Some(satisfied as f64 / 10.0)
}

/// Score of one prediction in [0, 1]; `None` excludes the item.
pub fn score_item(item: &BenchItem, prediction: Option<&Choice>) -> Option<f64> {
    let hit = |ok: bool| Some(if ok { 1.0 } else { 0.0 });
    match (item.answer_type, &item.truth) {
        (AnswerType::NumericOther, Truth::Number(t)) => match prediction {
            Some(Choice::Number(p)) => score_mra(*p, *t).or_else(|| if *t == 0.0 { None } else { Some(0.0) }),
            _ if *t == 0.0 => None,
            _ => Some(0.0),
        },
        (AnswerType::NumericCount, Truth::Number(t)) => {
            hit(matches!(prediction, Some(Choice::Number(p)) if p.round() == t.round()))
        }
        (_, Truth::Text(t)) => hit(match prediction {
            Some(Choice::Letter(c)) => t.len() == 1 && t.starts_with(*c),
            Some(Choice::Text(s)) => {
                let s = s.trim();
                s.eq_ignore_ascii_case(t)
                    || (s.len() > t.len()
                        && s.is_char_boundary(t.len())
                        && s[..t.len()].eq_ignore_ascii_case(t)
                        && !s[t.len()..].starts_with(|c: char| c.is_alphanumeric()))
            }
            Some(Choice::Number(_)) | None => false,
        }),
        (_, Truth::Number(t)) => hit(matches!(prediction, Some(Choice::Number(p)) if p == t)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// Mean item score; `None` when no item counted.
    pub overall: Option<f64>,
    /// Categories without items are absent.
    pub categories: BTreeMap<Category, f64>,
    /// Mean relative accuracy over numeric-other items.
    pub mra: Option<f64>,
    /// Items left out because their truth is zero.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("{results} results for {items} items")]
    LengthMismatch { results: usize, items: usize },
    #[error("result {index} is for {result}, expected item {item}")]
    IdMismatch { index: usize, result: String, item: String },
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Failures score zero. Overall and per-category values are item means.
pub fn score_accuracy(results: &[BenchResult], items: &[BenchItem]) -> Result<Scores, ScoreError> {
    if results.len() != items.len() {
        return Err(ScoreError::LengthMismatch { results: results.len(), items: items.len() });
    }
    let mut all = Vec::new();
    let mut by_cat: BTreeMap<Category, Vec<f64>> = BTreeMap::new();
    let mut mra = Vec::new();
    let mut excluded = Vec::new();
    for (index, (r, item)) in results.iter().zip(items).enumerate() {
        if r.id != item.id {
            return Err(ScoreError::IdMismatch { index, result: r.id.clone(), item: item.id.clone() });
        }
        match score_item(item, r.prediction.as_ref()) {
            Some(s) => {
                all.push(s);
                by_cat.entry(item.category).or_default().push(s);
                if item.answer_type == AnswerType::NumericOther {
                    mra.push(s);
                }
            }
            None => {
                tracing::warn!(id = %item.id, "zero ground truth, item excluded from scoring");
                excluded.push(item.id.clone());
            }
        }
    }
    Ok(Scores {
        overall: mean(&all),
        categories: by_cat.into_iter().filter_map(|(c, v)| mean(&v).map(|m| (c, m))).collect(),
        mra: mean(&mra),
        excluded,
    })
}
