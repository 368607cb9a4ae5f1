//! HTTP backend against a minimal local chat-completions server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use branchreach::llm::{ChatBackend, ChatRequest, GatewayError, HttpBackend, HttpConfig, Role};
use serde_json::Value;

#[derive(Clone)]
struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn ok(content: &str) -> Reply {
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
    Reply { status: 200, body, delay: Duration::ZERO }
}

fn status(code: u16) -> Reply {
    Reply { status: code, body: "{}".into(), delay: Duration::ZERO }
}

struct Seen {
    bodies: Vec<Value>,
    auth: Vec<Option<String>>,
}

/// Serves `replies` in order (the last one repeats) and records requests.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Seen>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Seen { bodies: Vec::new(), auth: Vec::new() }));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut length, mut auth) = (0usize, None);
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            {
                let mut log = log.lock().unwrap();
                log.bodies.push(serde_json::from_slice(&body).unwrap());
                log.auth.push(auth);
            }
            let reply = replies[i.min(replies.len() - 1)].clone();
            std::thread::sleep(reply.delay);
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
        }
    });
    (url, seen)
}

fn backend(url: &str, key_env: &str) -> HttpBackend {
    let mut config = HttpConfig::new(url);
    config.api_key_env = key_env.to_string();
    config.timeout = Duration::from_secs(2);
    config.retry_backoff = Duration::from_millis(10);
    HttpBackend::new(config).unwrap()
}

fn request() -> ChatRequest {
    ChatRequest::new("test-model", vec![(Role::User, "Summarize f.".into())])
}

#[test]
fn successful_completion() {
    let (url, seen) = serve(vec![ok("f adds one.")]);
    std::env::set_var("BR_TEST_KEY_OK", "sekrit");
    let response = backend(&url, "BR_TEST_KEY_OK").complete(&request()).unwrap();
    assert_eq!(response.text, "f adds one.");
    assert_eq!(response.endpoint_status, 200);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.auth, [Some("Bearer sekrit".to_string())]);
    let body = &seen.bodies[0];
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Summarize f.");
}

#[test]
fn transient_failures_are_retried() {
    let (url, seen) = serve(vec![status(503), status(429), ok("third time")]);
    let response = backend(&url, "BR_TEST_UNSET_1").complete(&request()).unwrap();
    assert_eq!(response.text, "third time");
    assert_eq!(seen.lock().unwrap().bodies.len(), 3);
    assert_eq!(seen.lock().unwrap().auth, [None, None, None]);
}

#[test]
fn persistent_server_error_after_two_retries() {
    let (url, seen) = serve(vec![status(500)]);
    let err = backend(&url, "BR_TEST_UNSET_2").complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointError { status: Some(500), .. }));
    assert_eq!(seen.lock().unwrap().bodies.len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![status(400)]);
    let err = backend(&url, "BR_TEST_UNSET_3").complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointError { status: Some(400), .. }));
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);
}

#[test]
fn unreachable_endpoint() {
    let err = backend("http://127.0.0.1:1/v1/chat/completions", "BR_TEST_UNSET_4").complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointError { status: None, .. }), "{err}");
}

#[test]
fn slow_endpoint_times_out() {
    let slow = Reply { delay: Duration::from_secs(4), ..ok("late") };
    let (url, _) = serve(vec![slow]);
    let mut config = HttpConfig::new(&url);
    config.timeout = Duration::from_millis(300);
    config.retries = 0;
    let err = HttpBackend::new(config).unwrap().complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointTimeout), "{err}");
}

#[test]
fn malformed_body() {
    let (url, _) = serve(vec![Reply { status: 200, body: r#"{"choices": []}"#.into(), delay: Duration::ZERO }]);
    let err = backend(&url, "BR_TEST_UNSET_5").complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointError { status: Some(200), .. }));
}

/// Opt-in check against a real endpoint: set BRANCHREACH_LIVE_ENDPOINT (and
/// the API key variable) and run with `--ignored`.
#[test]
#[ignore]
fn live_endpoint_smoke() {
    let url = std::env::var("BRANCHREACH_LIVE_ENDPOINT").expect("BRANCHREACH_LIVE_ENDPOINT");
    let model = std::env::var("BRANCHREACH_LIVE_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".into());
    let mut b = HttpBackend::new(HttpConfig::new(url)).unwrap();
    let r = b.complete(&ChatRequest::new(model, vec![(Role::User, "Say hello.".into())])).unwrap();
    assert!(!r.text.trim().is_empty());
}
