mod common;

use common::{chat_body, serve};
use simgap_core::llm::{llm_complete, ChatMessage, HttpConfig, HttpSource, LlmError, RequestRole};

fn config(endpoint: &str) -> HttpConfig {
    HttpConfig {
        endpoint: endpoint.to_string(),
        model: "mock-model".into(),
        temperature: 0.5,
        max_retries: 3,
        timeout_secs: 5.0,
        backoff_ms: 1,
    }
}

fn ask(source: &HttpSource) -> Result<simgap_core::llm::Completion, LlmError> {
    llm_complete(source, RequestRole::Reward, &[ChatMessage::system("sys"), ChatMessage::user("write a reward")])
}

#[test]
fn retries_server_errors_then_succeeds() {
    let server = serve(3, |i, _| if i < 2 { (500, "{}".into()) } else { (200, chat_body("done")) });
    let source = HttpSource::new(config(&server.base_url), None);
    let c = ask(&source).unwrap();
    assert_eq!(c.text, "done");
    assert_eq!(c.retry_count, 2);
    let reqs = server.requests();
    assert_eq!(reqs.len(), 3);
    assert!(reqs[0].headers[0].starts_with("POST /v1/chat/completions "));
    let body: serde_json::Value = serde_json::from_str(&reqs[2].body).unwrap();
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "write a reward");
}

#[test]
fn retries_are_bounded() {
    let server = serve(4, |_, _| (429, "{}".into()));
    let source = HttpSource::new(config(&server.base_url), None);
    assert_eq!(ask(&source).unwrap_err(), LlmError::RateLimited { retries: 3 });
    assert_eq!(server.requests().len(), 4);

    let server = serve(1, |_, _| (404, "{}".into()));
    let source = HttpSource::new(config(&server.base_url), None);
    assert_eq!(ask(&source).unwrap_err(), LlmError::Status { status: 404 });
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn empty_completion_is_an_error() {
    let server = serve(2, |i, _| {
        if i == 0 {
            (200, chat_body("  "))
        } else {
            (200, r#"{"choices": [{"message": {"role": "assistant", "content": null}}]}"#.into())
        }
    });
    let source = HttpSource::new(config(&server.base_url), None);
    assert_eq!(ask(&source).unwrap_err(), LlmError::EmptyCompletion);
    assert_eq!(ask(&source).unwrap_err(), LlmError::EmptyCompletion);
}

#[test]
fn malformed_body_is_reported() {
    let server = serve(1, |_, _| (200, r#"{"choices": []}"#.into()));
    let source = HttpSource::new(config(&server.base_url), None);
    assert!(matches!(ask(&source), Err(LlmError::InvalidResponse(_))));
}

#[test]
fn credentials_are_sent_but_never_logged() {
    let key = "sk-sentinel-7f3a9c";
    // The server echoes the authorization header back into the completion.
    let server = serve(2, |i, req| {
        let auth = req.headers.iter().find(|h| h.to_ascii_lowercase().starts_with("authorization:")).cloned();
        if i == 0 {
            (503, format!("{{\"error\": \"{}\"}}", auth.clone().unwrap_or_default()))
        } else {
            (200, chat_body(&format!("echo {}", auth.unwrap_or_default())))
        }
    });
    let source = HttpSource::new(config(&server.base_url), Some(key.into()));
    let c = ask(&source).unwrap();
    assert_eq!(c.retry_count, 1);
    assert!(server.requests()[0].headers.iter().any(|h| h == &format!("authorization: Bearer {key}") || h == &format!("Authorization: Bearer {key}")));
    let transcript = source.transcript().join("\n");
    assert!(transcript.contains("[REDACTED]"));
    assert!(!transcript.contains(key));
    assert!(!format!("{source:?}").contains(key));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut cfg = config(&format!("http://{addr}"));
    cfg.max_retries = 1;
    let source = HttpSource::new(cfg, None);
    assert!(matches!(ask(&source), Err(LlmError::Transport(_))));
}

#[test]
fn empty_message_list_is_rejected_before_sending() {
    let source = HttpSource::new(config("http://127.0.0.1:1"), None);
    assert_eq!(llm_complete(&source, RequestRole::Dr, &[]).unwrap_err(), LlmError::NoMessages);
}
