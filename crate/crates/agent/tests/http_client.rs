use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use spatial_agent::*;

/// Serves the scripted (status, body) replies in order, one per connection,
/// and keeps each request body.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = bodies.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            seen.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), bodies)
}

const OK: &str = r#"{"choices":[{"message":{"content":"The answer is B."}}],"usage":{"prompt_tokens":5,"completion_tokens":4}}"#;

fn client(base: String) -> HttpClient {
    HttpClient::new(HttpClientConfig {
        base_url: base,
        api_key: Some("k".into()),
        backoff_base: Duration::from_millis(100),
        timeout: Duration::from_secs(5),
        ..Default::default()
    })
    .unwrap()
}

fn req() -> ChatRequest {
    ChatRequest {
        model: "m".into(),
        system: None,
        parts: vec![Part::Text("question".into()), Part::Image(vec![1, 2, 3])],
        temperature: 0.0,
        max_tokens: 16,
        structured: false,
    }
}

#[test]
fn rate_limit_backs_off_once_then_succeeds() {
    let (base, bodies) = serve(vec![(429, "{}"), (200, OK)]);
    let start = Instant::now();
    let resp = client(base).send(&req()).unwrap();
    assert_eq!(resp.text, "The answer is B.");
    assert_eq!(resp.usage.completion_tokens, 4);
    assert!(start.elapsed() >= Duration::from_millis(100));
    let bodies = bodies.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    assert!(bodies[0].contains("data:image/png;base64,AQID"));
}

#[test]
fn bad_credential_is_not_retried() {
    let (base, bodies) = serve(vec![(401, r#"{"error":"bad key"}"#), (200, OK)]);
    let err = client(base).send(&req()).unwrap_err();
    assert!(matches!(err, ClientError::Auth { status: 401, .. }), "{err}");
    assert_eq!(bodies.lock().unwrap().len(), 1);
}

#[test]
fn server_errors_exhaust_retries() {
    let (base, bodies) = serve(vec![(500, "a"), (502, "b"), (503, "c")]);
    let c = HttpClient::new(HttpClientConfig {
        base_url: base,
        backoff_base: Duration::from_millis(10),
        max_attempts: 3,
        ..Default::default()
    })
    .unwrap();
    let err = c.send(&req()).unwrap_err();
    assert_eq!(err, ClientError::Transport { attempts: 3, status: Some(503), message: "c".into() });
    assert_eq!(bodies.lock().unwrap().len(), 3);
}

#[test]
fn image_limit_is_enforced_before_sending() {
    let c = HttpClient::new(HttpClientConfig { base_url: "http://127.0.0.1:9".into(), max_images: 0, ..Default::default() })
        .unwrap();
    assert_eq!(c.send(&req()).unwrap_err(), ClientError::TooManyImages { count: 1, limit: 0 });
}
