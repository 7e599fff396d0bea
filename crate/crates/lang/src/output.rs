use image::RgbImage;
use serde::{Deserialize, Serialize};

/// One tool invocation recorded during execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub call: String,
    pub args_summary: String,
    pub output_kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Text,
    Image,
    ImageList,
}

impl OutputKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::Text => "text",
            OutputKind::Image => "image",
            OutputKind::ImageList => "image_list",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputPayload {
    Text(String),
    Image(RgbImage),
    Images(Vec<RgbImage>),
}

/// The classified return value of a program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramOutput {
    pub payload: OutputPayload,
    pub trace: Vec<TraceEntry>,
    /// Source comments, in order. Informational only.
    pub comments: Vec<String>,
}

impl ProgramOutput {
    pub fn kind(&self) -> OutputKind {
        match self.payload {
            OutputPayload::Text(_) => OutputKind::Text,
            OutputPayload::Image(_) => OutputKind::Image,
            OutputPayload::Images(_) => OutputKind::ImageList,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            OutputPayload::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn images(&self) -> Vec<&RgbImage> {
        match &self.payload {
            OutputPayload::Text(_) => Vec::new(),
            OutputPayload::Image(i) => vec![i],
            OutputPayload::Images(v) => v.iter().collect(),
        }
    }
}

/// Line-delimited JSON, one record per entry.
pub fn trace_to_jsonl(trace: &[TraceEntry]) -> String {
    trace
        .iter()
        .map(|e| serde_json::to_string(e).expect("trace entries serialize") + "\n")
        .collect()
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceEntry>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
