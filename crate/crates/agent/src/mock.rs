//! Offline clients: fixture replay, scripted responders and a recorder.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, ChatRequest, ChatResponse, ClientError, TokenUsage};

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub response_text: String,
}

pub fn read_fixtures(path: &Path) -> Result<Vec<FixtureRecord>, ClientError> {
    let text = fs::read_to_string(path).map_err(|e| ClientError::Fixture(format!("{}: {e}", path.display())))?;
    parse_fixtures(&text)
}

pub fn parse_fixtures(text: &str) -> Result<Vec<FixtureRecord>, ClientError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ClientError::Fixture(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn fixtures_to_jsonl(records: &[FixtureRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("fixture serializes") + "\n").collect()
}

fn respond(text: String) -> ChatResponse {
    ChatResponse { text, usage: TokenUsage::default(), latency: Duration::ZERO }
}

/// Replays responses keyed by request digest.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    responses: HashMap<String, String>,
}

impl MockClient {
    pub fn new(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        let mut responses = HashMap::new();
        for r in records {
            responses.entry(r.digest).or_insert(r.response_text);
        }
        Self { responses }
    }

    pub fn from_path(path: &Path) -> Result<Self, ClientError> {
        Ok(Self::new(read_fixtures(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatClient for MockClient {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let digest = request.digest();
        match self.responses.get(&digest) {
            Some(text) => Ok(respond(text.clone())),
            None => Err(ClientError::FixtureMissing { digest }),
        }
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync;

/// Answers from a queue of canned replies or from a function of the request.
pub struct ScriptedClient {
    queue: Mutex<VecDeque<Result<String, ClientError>>>,
    responder: Option<Box<Responder>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedClient {
    /// Replies in order; fails with a transport error once exhausted.
    pub fn queue(replies: impl IntoIterator<Item = Result<String, ClientError>>) -> Self {
        Self { queue: Mutex::new(replies.into_iter().collect()), responder: None, requests: Mutex::new(Vec::new()) }
    }

    pub fn texts<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::queue(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn from_fn(f: impl Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync + 'static) -> Self {
        Self { queue: Mutex::new(VecDeque::new()), responder: Some(Box::new(f)), requests: Mutex::new(Vec::new()) }
    }

    /// Every request received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("request log lock").clone()
    }
}

impl ChatClient for ScriptedClient {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        self.requests.lock().expect("request log lock").push(request.clone());
        let reply = match &self.responder {
            Some(f) => f(request),
            None => self.queue.lock().expect("queue lock").pop_front().unwrap_or_else(|| {
                Err(ClientError::Transport { attempts: 1, status: None, message: "scripted replies exhausted".into() })
            }),
        };
        reply.map(respond)
    }
}

/// Forwards to an inner client and keeps every successful exchange.
pub struct RecordingClient<C> {
    inner: C,
    records: Mutex<Vec<FixtureRecord>>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, records: Mutex::new(Vec::new()) }
    }

    /// Recorded exchanges sorted by digest, so concurrent runs save identically.
    pub fn records(&self) -> Vec<FixtureRecord> {
        let mut r = self.records.lock().expect("record lock").clone();
        r.sort_by(|a, b| a.digest.cmp(&b.digest));
        r.dedup_by(|a, b| a.digest == b.digest);
        r
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, fixtures_to_jsonl(&self.records()))
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let resp = self.inner.send(request)?;
        self.records
            .lock()
            .expect("record lock")
            .push(FixtureRecord { digest: request.digest(), response_text: resp.text.clone() });
        Ok(resp)
    }

    fn max_images(&self) -> usize {
        self.inner.max_images()
    }

    fn supports_structured(&self) -> bool {
        self.inner.supports_structured()
    }
}
