use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use inductor::proposer::{HttpBackend, LmClient, LmError, LmRequest, RequestContext, RetryPolicy};
use serde_json::Value as Json;

/// Serves one canned (status, body) per connection and records request bodies.
fn mock(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Json>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
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
            log.lock().unwrap().push(serde_json::from_slice(&buf).unwrap());
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 1000, "completion_tokens": 500}
    })
    .to_string()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(1), max_delay: Duration::from_millis(5) }
}

fn request(temperature: f64) -> LmRequest {
    LmRequest { model: "gpt-4-0613".into(), prompt: "Generate a rule.".into(), temperature, max_tokens: 64 }
}

const CTX: RequestContext<'static> = RequestContext { task_id: "t", sample_index: 3, seed: 11 };

#[test]
fn sends_a_single_user_message_and_records_usage() {
    let (url, seen) = mock(vec![(200, ok_body("Rule: reverse"))]);
    let client = LmClient::new(Arc::new(HttpBackend::new(url, Some("k".into()), 0).sending_seed(true)));
    let c = client.cached_complete(&request(0.7), &CTX).unwrap();
    assert_eq!(c.response.text, "Rule: reverse");
    assert!(!c.cached);
    let body = &seen.lock().unwrap()[0];
    assert_eq!(body["model"], "gpt-4-0613");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["seed"], 14);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1);
    assert_eq!(messages[0]["role"], "user");
    assert_eq!(messages[0]["content"], "Generate a rule.");
    let ledger = client.ledger();
    assert_eq!(ledger.api_calls, 1);
    // 1000 prompt tokens at 0.03 and 500 completion tokens at 0.06 per thousand
    assert!((ledger.estimated_cost - 0.06).abs() < 1e-12);
}

#[test]
fn retries_rate_limits_and_server_errors() {
    let (url, seen) = mock(vec![(429, "{}".into()), (500, "{}".into()), (200, ok_body("fine"))]);
    let client = LmClient::new(Arc::new(HttpBackend::new(url, None, 0))).with_retry(fast_retry());
    let c = client.cached_complete(&request(0.0), &CTX).unwrap();
    assert_eq!(c.response.text, "fine");
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert_eq!(client.ledger().api_calls, 1);
}

#[test]
fn gives_up_after_the_attempt_budget() {
    let (url, _) = mock(vec![(503, "{}".into()), (503, "{}".into()), (503, "{}".into())]);
    let client = LmClient::new(Arc::new(HttpBackend::new(url, None, 0))).with_retry(fast_retry());
    let err = client.cached_complete(&request(0.0), &CTX).unwrap_err();
    assert!(matches!(err, LmError::Status { code: 503, .. }));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = mock(vec![(400, "{\"error\":\"bad\"}".into()), (200, ok_body("unused"))]);
    let client = LmClient::new(Arc::new(HttpBackend::new(url, None, 0))).with_retry(fast_retry());
    let err = client.cached_complete(&request(0.0), &CTX).unwrap_err();
    assert!(matches!(err, LmError::Status { code: 400, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_replies_are_reported() {
    let (url, _) = mock(vec![(200, "{\"choices\": []}".into())]);
    let client = LmClient::new(Arc::new(HttpBackend::new(url, None, 0)));
    assert!(matches!(client.cached_complete(&request(0.0), &CTX), Err(LmError::Malformed(_))));
}
