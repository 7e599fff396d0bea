//! OpenAI-compatible `/chat/completions` client.

use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};

use crate::client::{check_image_limit, ChatClient, ChatRequest, ChatResponse, ClientError, Part, TokenUsage};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const BASE_URL_ENV: &str = "OPENAI_BASE_URL";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpClientConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base: Duration,
    pub max_attempts: u32,
    pub max_images: usize,
    pub structured: bool,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            backoff_base: Duration::from_secs(1),
            max_attempts: 5,
            max_images: 50,
            structured: true,
        }
    }
}

impl HttpClientConfig {
    /// Fills the credential and base URL from the environment when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.is_empty() {
                self.base_url = url;
            }
        }
        self
    }
}

pub struct HttpClient {
    config: HttpClientConfig,
    http: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, ClientError> {
        if config.max_attempts == 0 {
            return Err(ClientError::Transport { attempts: 0, status: None, message: "max_attempts must be positive".into() });
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Transport { attempts: 0, status: None, message: e.to_string() })?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &HttpClientConfig {
        &self.config
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        let content: Vec<Value> = request
            .parts
            .iter()
            .map(|p| match p {
                Part::Text(t) => json!({"type": "text", "text": t}),
                Part::Image(bytes) => json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:image/png;base64,{}", b64.encode(bytes))}
                }),
            })
            .collect();
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": content}));
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if request.structured && self.config.structured {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {
                    "name": "program",
                    "strict": true,
                    "schema": {
                        "type": "object",
                        "properties": {"reasoning": {"type": "string"}, "code": {"type": "string"}},
                        "required": ["reasoning", "code"],
                        "additionalProperties": false
                    }
                }
            });
        }
        body
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn parse_response(body: &str) -> Result<(String, TokenUsage), ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::BadResponse(e.to_string()))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| ClientError::BadResponse("missing choices[0].message.content".into()))?
        .to_string();
    let usage = TokenUsage {
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok((text, usage))
}

impl ChatClient for HttpClient {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        check_image_limit(request, self.config.max_images)?;
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::to_vec(&self.body(request)).expect("request body serializes");
        let start = Instant::now();
        let mut delay = self.config.backoff_base;
        let mut last = (None, String::new());
        for attempt in 1..=self.config.max_attempts {
            let mut builder = self.http.post(&url).header("content-type", "application/json").body(body.clone());
            if let Some(key) = &self.config.api_key {
                builder = builder.bearer_auth(key);
            }
            match builder.send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().unwrap_or_default();
                    if (200..300).contains(&status) {
                        let (text, usage) = parse_response(&text)?;
                        return Ok(ChatResponse { text, usage, latency: start.elapsed() });
                    }
                    if status == 401 || status == 403 {
                        return Err(ClientError::Auth { status, message: text });
                    }
                    if !retryable(status) {
                        return Err(ClientError::Transport { attempts: attempt, status: Some(status), message: text });
                    }
                    last = (Some(status), text);
                }
                Err(e) if e.is_timeout() || e.is_connect() => last = (None, e.to_string()),
                Err(e) => return Err(ClientError::Transport { attempts: attempt, status: None, message: e.to_string() }),
            }
            if attempt < self.config.max_attempts {
                tracing::warn!(attempt, status = ?last.0, "chat request failed, retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(ClientError::Transport { attempts: self.config.max_attempts, status: last.0, message: last.1 })
    }

    fn max_images(&self) -> usize {
        self.config.max_images
    }

    fn supports_structured(&self) -> bool {
        self.config.structured
    }
}
