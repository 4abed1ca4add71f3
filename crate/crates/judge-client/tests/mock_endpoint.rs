//! End-to-end client behavior against a scripted localhost endpoint.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use judge_client::{request_judgment, run_tasks, ClientError, EndpointConfig, JudgmentTask};

/// Serve scripted (status, body) responses, one per connection.
fn spawn_server(script: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    std::thread::spawn(move || {
        for (status, body) in script {
            let (mut stream, _) = match listener.accept() {
                Ok(pair) => pair,
                Err(_) => return,
            };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let mut content_length = 0usize;
            let mut header_end = 0usize;
            loop {
                let n = match stream.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => n,
                    Err(_) => break,
                };
                buf.extend_from_slice(&chunk[..n]);
                if header_end == 0 {
                    if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        header_end = pos + 4;
                        let head = String::from_utf8_lossy(&buf[..pos]);
                        for line in head.lines() {
                            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                                content_length = v.trim().parse().unwrap_or(0);
                            }
                        }
                    }
                }
                if header_end > 0 && buf.len() >= header_end + content_length {
                    break;
                }
            }
            let reason = if status == 200 { "OK" } else { "Error" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}/v1"), hits)
}

fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn task() -> JudgmentTask {
    JudgmentTask {
        question_id: "q1".into(),
        question_text: "Compare the answers.".into(),
        response_a: "Answer A.".into(),
        response_b: "Answer B.".into(),
        judge: "mock-judge".into(),
        setting: "setting1".into(),
    }
}

fn config(base_url: &str, key_env: &str) -> EndpointConfig {
    std::env::set_var(key_env, "test-key");
    EndpointConfig {
        base_url: base_url.to_string(),
        api_key_env: key_env.to_string(),
        max_retries: 3,
        timeout_secs: 5,
        ..EndpointConfig::default()
    }
}

const FULL_REPLY: &str = "Correctness: ((A>B))\nCompleteness: ((A=B))\nSafety: ((A=B))\n\
                          Conciseness: ((B>A))\nStyle: ((A=B))\nMy final verdict is [[A>B]]";

#[test]
fn well_formed_reply_yields_unflagged_record() {
    let (url, hits) = spawn_server(vec![(200, chat_body(FULL_REPLY))]);
    let record = request_judgment(&task(), &config(&url, "MOCK_KEY_OK")).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 1);
    assert!(record.factor_flags.iter().all(|f| !f));
    assert!(!record.overall_flag);
    assert_eq!(record.raw_text.as_deref(), Some(FULL_REPLY));
}

#[test]
fn missing_verdict_is_flagged_not_an_error() {
    let reply = "Correctness: ((A>B))\nCompleteness: ((A=B))\nConciseness: ((B>A))\n\
                 Style: ((A=B))\nMy final verdict is [[A>B]]";
    let (url, _) = spawn_server(vec![(200, chat_body(reply))]);
    let record = request_judgment(&task(), &config(&url, "MOCK_KEY_FLAG")).unwrap();
    assert!(record.factor_flags[2], "Safety missing -> flagged");
    assert!(record.factor_verdicts[2].is_none());
}

#[test]
fn client_error_is_not_retried() {
    let (url, hits) = spawn_server(vec![(400, "{}".into()), (400, "{}".into())]);
    let err = request_judgment(&task(), &config(&url, "MOCK_KEY_400")).unwrap_err();
    assert!(matches!(err, ClientError::Http { status: 400 }));
    assert!(err.is_network());
    assert_eq!(hits.load(Ordering::SeqCst), 1, "4xx must not retry");
}

#[test]
fn server_error_retries_then_succeeds() {
    let (url, hits) = spawn_server(vec![
        (500, "{}".into()),
        (200, chat_body(FULL_REPLY)),
    ]);
    let record = request_judgment(&task(), &config(&url, "MOCK_KEY_RETRY")).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 2);
    assert!(!record.overall_flag);
}

#[test]
fn exhausted_retries_carry_the_task_identity() {
    // nothing listens on this port after the listener drops
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut cfg = config(&format!("http://{addr}/v1"), "MOCK_KEY_DEAD");
    cfg.max_retries = 2;
    let err = request_judgment(&task(), &cfg).unwrap_err();
    match err {
        ClientError::Exhausted {
            question_id,
            attempts,
            ..
        } => {
            assert_eq!(question_id, "q1");
            assert_eq!(attempts, 2);
        }
        other => panic!("expected Exhausted, got {other:?}"),
    }
}

#[test]
fn missing_api_key_fails_before_any_request() {
    let (url, hits) = spawn_server(vec![(200, chat_body(FULL_REPLY))]);
    let mut cfg = config(&url, "MOCK_KEY_UNSET");
    std::env::remove_var("MOCK_KEY_UNSET");
    cfg.api_key_env = "MOCK_KEY_UNSET".into();
    let err = request_judgment(&task(), &cfg).unwrap_err();
    assert!(matches!(err, ClientError::MissingKey(_)));
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}

#[test]
fn batch_run_writes_ingestible_jsonl() {
    let replies: Vec<(u16, String)> = (0..3).map(|_| (200, chat_body(FULL_REPLY))).collect();
    let (url, _) = spawn_server(replies);
    let mut cfg = config(&url, "MOCK_KEY_BATCH");
    cfg.concurrency = 2;
    let tasks: Vec<JudgmentTask> = (0..3)
        .map(|i| JudgmentTask {
            question_id: format!("q{i}"),
            ..task()
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("judgments.jsonl");
    let summary = run_tasks(&tasks, &cfg, &out).unwrap();
    assert_eq!(summary.written, 3);
    assert!(summary.failures.is_empty());
    let set = audit_core::judgment::load_judgments(
        &out,
        audit_core::judgment::InputFormat::JsonLines,
    )
    .unwrap();
    assert_eq!(set.records.len(), 3);
    assert_eq!(set.flagged_field_count(), 0);
}
