//! Line-delimited benchmark records.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spatial_agent::AnswerSpace;
use spatial_core::scene::{Scene, SceneError};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Rotation,
    Among,
    Around,
    Other,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Rotation, Category::Among, Category::Around, Category::Other];

    pub fn title(self) -> &'static str {
        match self {
            Category::Rotation => "Rotation",
            Category::Among => "Among",
            Category::Around => "Around",
            Category::Other => "Other",
        }
    }

    /// Setting names and item ids mention the category as a word.
    fn detect(text: &str) -> Option<Category> {
        let lower = text.to_ascii_lowercase();
        [("rotation", Category::Rotation), ("among", Category::Among), ("around", Category::Around)]
            .into_iter()
            .find(|(w, _)| lower.contains(w))
            .map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerType {
    #[serde(rename = "multi-choice")]
    MultiChoice,
    #[serde(rename = "yes/no")]
    YesNo,
    #[serde(rename = "numeric-count")]
    NumericCount,
    #[serde(rename = "numeric-other")]
    NumericOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truth {
    Number(f64),
    Text(String),
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Number(x) => write!(f, "{x}"),
            Truth::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchItem {
    pub id: String,
    pub question: String,
    /// Lettered options in order; empty for numeric and free-text items.
    pub options: Vec<(char, String)>,
    pub image_paths: Vec<PathBuf>,
    pub category: Category,
    pub truth: Truth,
    pub answer_type: AnswerType,
}

impl BenchItem {
    pub fn answer_space(&self) -> AnswerSpace {
        match self.answer_type {
            AnswerType::MultiChoice if !self.options.is_empty() => AnswerSpace::Options { options: self.options.clone() },
            AnswerType::MultiChoice => AnswerSpace::Free,
            AnswerType::YesNo => AnswerSpace::YesNo,
            AnswerType::NumericCount | AnswerType::NumericOther => AnswerSpace::Numeric,
        }
    }

    pub fn scene(&self) -> Result<Scene, SceneError> {
        Scene::load(&self.image_paths, self.question.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    MindCube,
    Omni3d,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mindcube" => Ok(DatasetFormat::MindCube),
            "omni3d" => Ok(DatasetFormat::Omni3d),
            other => Err(format!("unknown dataset format '{other}', expected mindcube or omni3d")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Record { path: PathBuf, line: usize, message: String },
    #[error("item {id} references missing image {}", path.display())]
    MissingImage { id: String, path: PathBuf },
}

/// Splits lines that start with `A.`, `B.`, ... into options. Letters must
/// run consecutively from `A`; at least two are needed.
pub fn split_options(question: &str) -> Vec<(char, String)> {
    let mut options: Vec<(char, String)> = Vec::new();
    for line in question.lines() {
        let t = line.trim_start();
        let mut chars = t.chars();
        if let (Some(l), Some('.')) = (chars.next(), chars.next()) {
            if l.is_ascii_uppercase() && l as u8 == b'A' + options.len() as u8 {
                options.push((l, chars.as_str().trim().to_string()));
            }
        }
    }
    if options.len() < 2 || options.iter().any(|(_, t)| t.is_empty()) {
        return Vec::new();
    }
    options
}

fn str_field<'a>(v: &'a Value, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| v.get(*k).and_then(Value::as_str))
}

fn images_field(v: &Value) -> Option<Vec<String>> {
    for k in ["images", "image_paths", "image"] {
        match v.get(k) {
            Some(Value::String(s)) => return Some(vec![s.clone()]),
            Some(Value::Array(a)) => return a.iter().map(|x| x.as_str().map(str::to_string)).collect(),
            _ => {}
        }
    }
    None
}

fn id_field(v: &Value) -> Option<String> {
    match v.get("id") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_record(v: &Value, format: DatasetFormat) -> Result<BenchItem, String> {
    let id = id_field(v).ok_or("missing \"id\"")?;
    let question = str_field(v, &["question"]).ok_or("missing \"question\"")?.to_string();
    let images = images_field(v).ok_or("missing \"images\"")?;
    if images.is_empty() {
        return Err("\"images\" is empty".into());
    }
    let image_paths = images.into_iter().map(PathBuf::from).collect();
    match format {
        DatasetFormat::MindCube => {
            let gt = str_field(v, &["gt_answer", "answer"]).ok_or("missing \"gt_answer\"")?.trim().to_string();
            let category = str_field(v, &["setting", "category", "type"])
                .and_then(Category::detect)
                .or_else(|| Category::detect(&id))
                .unwrap_or(Category::Other);
            let options = split_options(&question);
            let truth = gt.trim_end_matches('.').to_string();
            if !options.is_empty() && !options.iter().any(|(l, _)| l.to_string() == truth) {
                return Err(format!("ground truth {truth:?} is not one of the options"));
            }
            Ok(BenchItem {
                id,
                question,
                options,
                image_paths,
                category,
                truth: Truth::Text(truth),
                answer_type: AnswerType::MultiChoice,
            })
        }
        DatasetFormat::Omni3d => {
            let declared = str_field(v, &["answer_type"]).unwrap_or("");
            let answer = v.get("answer").ok_or("missing \"answer\"")?;
            let number = answer.as_f64().or_else(|| answer.as_str().and_then(|s| s.trim().parse().ok()));
            let text = answer.as_str().map(|s| s.trim().to_string());
            let options = split_options(&question);
            let (answer_type, truth) = match declared {
                "int" | "count" | "numeric-count" => (AnswerType::NumericCount, Truth::Number(number.ok_or("non-numeric answer")?)),
                "float" | "numeric-other" => (AnswerType::NumericOther, Truth::Number(number.ok_or("non-numeric answer")?)),
                _ => {
                    let text = text.ok_or("answer must be text")?;
                    let lower = text.to_ascii_lowercase();
                    if lower == "yes" || lower == "no" {
                        (AnswerType::YesNo, Truth::Text(lower))
                    } else if let Some(x) = number {
                        (AnswerType::NumericOther, Truth::Number(x))
                    } else {
                        (AnswerType::MultiChoice, Truth::Text(text))
                    }
                }
            };
            if let Truth::Number(x) = truth {
                if !x.is_finite() {
                    return Err("numeric answer must be finite".into());
                }
            }
            let options = if answer_type == AnswerType::MultiChoice { options } else { Vec::new() };
            Ok(BenchItem { id, question, options, image_paths, category: Category::Other, truth, answer_type })
        }
    }
}

/// Reads one record per line. Relative image paths resolve against
/// `images_root`, and every image must exist.
pub fn load_dataset(path: &Path, format: DatasetFormat, images_root: &Path) -> Result<Vec<BenchItem>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let located = |message: String| DatasetError::Record { path: path.to_path_buf(), line: i + 1, message };
        let v: Value = serde_json::from_str(line).map_err(|e| located(e.to_string()))?;
        let mut item = parse_record(&v, format).map_err(located)?;
        for p in &mut item.image_paths {
            if p.is_relative() {
                *p = images_root.join(&*p);
            }
            if !p.is_file() {
                return Err(DatasetError::MissingImage { id: item.id.clone(), path: p.clone() });
            }
        }
        items.push(item);
    }
    Ok(items)
}
