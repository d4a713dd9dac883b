//! JudgeClient behavior against a live local stub: retry policy, error
//! classification, and response extraction.

mod common;

use std::sync::atomic::Ordering;

use common::{spawn_judge, StubReply};
use probejudge::error::Error;
use probejudge::judge::{JudgeClient, JudgeConfig};

fn config(endpoint: &str, retries: u32) -> JudgeConfig {
    JudgeConfig {
        endpoint: endpoint.to_string(),
        retries,
        timeout_secs: 10,
        ..JudgeConfig::default()
    }
}

#[test]
fn server_errors_are_retried_until_success() {
    let judge = spawn_judge(|n, _| {
        if n < 2 {
            StubReply::Status(500, "{\"error\": \"overloaded\"}".into())
        } else {
            StubReply::Content("FINAL JUDGEMENT: valid".into())
        }
    });
    let client = JudgeClient::new(config(&judge.endpoint, 2)).unwrap();
    let response = client.query("judge this").unwrap();
    assert_eq!(response, "FINAL JUDGEMENT: valid");
    assert_eq!(judge.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_fail_immediately_without_retry() {
    let judge = spawn_judge(|_, _| StubReply::Status(404, "not found".into()));
    let client = JudgeClient::new(config(&judge.endpoint, 3)).unwrap();
    let err = client.query("judge this").unwrap_err();
    match err {
        Error::Api { status, .. } => assert_eq!(status, 404),
        other => panic!("expected api error, got {other:?}"),
    }
    assert_eq!(judge.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn exhausted_retries_surface_as_transport_error() {
    let judge = spawn_judge(|_, _| StubReply::Status(503, "busy".into()));
    let client = JudgeClient::new(config(&judge.endpoint, 1)).unwrap();
    let err = client.query("judge this").unwrap_err();
    match err {
        Error::Transport { attempts, .. } => assert_eq!(attempts, 2),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(judge.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    // nothing listens on this port; connection is refused instantly
    let client = JudgeClient::new(config("http://127.0.0.1:9/v1/chat/completions", 0)).unwrap();
    assert!(matches!(
        client.query("judge this"),
        Err(Error::Transport { attempts: 1, .. })
    ));
}

#[test]
fn prompt_reaches_the_endpoint_verbatim() {
    let judge = spawn_judge(|_, prompt| StubReply::Content(format!("echo: {prompt}")));
    let client = JudgeClient::new(config(&judge.endpoint, 0)).unwrap();
    let prompt = "line one\nline \"two\" with quotes\n{code}";
    let response = client.query(prompt).unwrap();
    assert_eq!(response, format!("echo: {prompt}"));
}