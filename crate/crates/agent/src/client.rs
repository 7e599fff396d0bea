use std::io::Cursor;
use std::time::Duration;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One piece of the user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Text(String),
    /// PNG-encoded image.
    Image(Vec<u8>),
}

impl Part {
    pub fn image(img: &RgbImage) -> Part {
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).expect("PNG encoding to memory cannot fail");
        Part::Image(buf.into_inner())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: Option<String>,
    pub parts: Vec<Part>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Ask for a JSON object with `reasoning` and `code` fields.
    pub structured: bool,
}

impl ChatRequest {
    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Image(_))).count()
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Hex SHA-256 over a canonical encoding. Images contribute their own
    /// digest, so the value is stable across runs.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            model: &'a str,
            system: Option<&'a str>,
            parts: Vec<(&'static str, String)>,
            temperature: f64,
            max_tokens: u32,
            structured: bool,
        }
        let parts = self
            .parts
            .iter()
            .map(|p| match p {
                Part::Text(t) => ("text", t.clone()),
                Part::Image(bytes) => ("image", hex::encode(Sha256::digest(bytes))),
            })
            .collect();
        let canonical = Canonical {
            model: &self.model,
            system: self.system.as_deref(),
            parts,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            structured: self.structured,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&canonical).expect("canonical request serializes")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: TokenUsage,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("authentication failed with status {status}: {message}")]
    Auth { status: u16, message: String },
    #[error("request failed after {attempts} attempt(s); last status {status:?}: {message}")]
    Transport { attempts: u32, status: Option<u16>, message: String },
    #[error("request carries {count} images, client accepts at most {limit}")]
    TooManyImages { count: usize, limit: usize },
    #[error("no recorded response for request digest {digest}")]
    FixtureMissing { digest: String },
    #[error("cannot read fixtures: {0}")]
    Fixture(String),
    #[error("unexpected response body: {0}")]
    BadResponse(String),
}

/// A chat-completion endpoint. Implementations accept concurrent calls.
pub trait ChatClient: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError>;

    /// Upper bound on attached images per request.
    fn max_images(&self) -> usize {
        usize::MAX
    }

    /// Whether the endpoint honours `ChatRequest::structured`.
    fn supports_structured(&self) -> bool {
        false
    }
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        (**self).send(request)
    }

    fn max_images(&self) -> usize {
        (**self).max_images()
    }

    fn supports_structured(&self) -> bool {
        (**self).supports_structured()
    }
}

impl<C: ChatClient + ?Sized> ChatClient for std::sync::Arc<C> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        (**self).send(request)
    }

    fn max_images(&self) -> usize {
        (**self).max_images()
    }

    fn supports_structured(&self) -> bool {
        (**self).supports_structured()
    }
}

pub(crate) fn check_image_limit(request: &ChatRequest, limit: usize) -> Result<(), ClientError> {
    let count = request.image_count();
    if count > limit {
        return Err(ClientError::TooManyImages { count, limit });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            system: None,
            parts: vec![Part::Text(text.into()), Part::image(&RgbImage::new(2, 2))],
            temperature: 0.0,
            max_tokens: 100,
            structured: false,
        }
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        assert_eq!(req("a").digest(), req("a").digest());
        assert_ne!(req("a").digest(), req("b").digest());
        let mut other = req("a");
        other.parts[1] = Part::image(&RgbImage::from_pixel(2, 2, image::Rgb([1, 0, 0])));
        assert_ne!(req("a").digest(), other.digest());
        assert_eq!(req("a").digest().len(), 64);
    }

    #[test]
    fn counts_images() {
        assert_eq!(req("a").image_count(), 1);
        assert!(check_image_limit(&req("a"), 0).is_err());
    }
}
