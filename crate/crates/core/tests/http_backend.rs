mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use common::{chat_reply, serve, Response};
use resumeflow::doc_model::IndexedDocument;
use resumeflow::extract::{
    run_extraction, BackendError, CompletionBackend, DecodeConfig, ExtractionTask, HttpBackend,
};
use serde_json::Value;

type Seen = (Value, Option<String>);

fn config(url: &str) -> DecodeConfig {
    DecodeConfig { endpoint: format!("{url}/v1/chat/completions"), ..Default::default() }
}

#[test]
fn request_carries_prompt_and_decode_settings() {
    let seen: Arc<Mutex<Vec<Seen>>> = Arc::default();
    let log = seen.clone();
    let url = serve(move |req| {
        log.lock().unwrap().push((req.json(), req.header("authorization").map(String::from)));
        Response::ok(chat_reply("hello"))
    });
    let backend = HttpBackend::new(Duration::from_secs(5)).with_api_key("secret");
    let text = backend.complete("the prompt", &config(&url)).unwrap();
    assert_eq!(text, "hello");

    let seen = seen.lock().unwrap();
    let (body, auth) = &seen[0];
    assert_eq!(body["model"], "qwen3-0.6b");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["repetition_penalty"], 1.01);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "the prompt");
    assert_eq!(auth.as_deref(), Some("Bearer secret"));
}

#[test]
fn legacy_text_choice_is_accepted() {
    let url = serve(|_| Response::ok(r#"{"choices":[{"text":"plain"}]}"#));
    let text = HttpBackend::new(Duration::from_secs(5)).complete("p", &config(&url)).unwrap();
    assert_eq!(text, "plain");
}

#[test]
fn slow_server_times_out() {
    let url = serve(|_| Response::ok(chat_reply("late")).delayed(Duration::from_millis(1500)));
    let err = HttpBackend::new(Duration::from_millis(200)).complete("p", &config(&url)).unwrap_err();
    assert_eq!(err, BackendError::Timeout);
}

#[test]
fn error_status_is_transport_failure() {
    let url = serve(|_| Response::status(500, "{}"));
    let err = HttpBackend::new(Duration::from_secs(5)).complete("p", &config(&url)).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
}

#[test]
fn malformed_body_is_protocol_failure() {
    let url = serve(|_| Response::ok("not json"));
    let err = HttpBackend::new(Duration::from_secs(5)).complete("p", &config(&url)).unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)));
    let url = serve(|_| Response::ok(r#"{"choices":[]}"#));
    let err = HttpBackend::new(Duration::from_secs(5)).complete("p", &config(&url)).unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)));
}

#[test]
fn unreachable_endpoint_is_transport_failure() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let err = HttpBackend::new(Duration::from_secs(2)).complete("p", &config(&url)).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_) | BackendError::Timeout));
}

fn answer(prompt: &str) -> String {
    match ExtractionTask::from_prompt(prompt).unwrap() {
        ExtractionTask::BasicInfo => r#"{"basicInfo": {"name": "Gu Dabai", "phoneNumber": "13987898888"}}"#.into(),
        ExtractionTask::Education => r#"{"education": [{"school": "Fudan University", "major": "Finance"}]}"#.into(),
        ExtractionTask::WorkExperience => {
            r#"Sure! {"workExperience": [{"company": "Acme", "position": "Analyst", "description": [2, 3]}]}"#.into()
        }
    }
}

#[test]
fn extraction_over_http_retries_transient_failures() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let url = serve(move |req| {
        if counter.fetch_add(1, Ordering::SeqCst) < 2 {
            return Response::status(503, "{}");
        }
        let prompt = req.json()["messages"][0]["content"].as_str().unwrap().to_string();
        Response::ok(chat_reply(&answer(&prompt)))
    });
    let doc = IndexedDocument::from_texts(&["Gu Dabai", "Phone: 13987898888", "Did things.", "Did more."]).unwrap();
    let outcome = run_extraction(&doc, &HttpBackend::new(Duration::from_secs(5)), &config(&url)).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    assert_eq!(calls.load(Ordering::SeqCst), 5);
    assert_eq!(outcome.record.basic.name, "Gu Dabai");
    assert_eq!(outcome.record.education[0].school, "Fudan University");
    assert_eq!(outcome.record.work[0].description, "Did things.\nDid more.");
}

#[test]
fn all_tasks_down_is_backend_unavailable() {
    let url = serve(|_| Response::status(502, "{}"));
    let doc = IndexedDocument::from_texts(&["x"]).unwrap();
    let cfg = DecodeConfig { retries: 1, ..config(&url) };
    let err = run_extraction(&doc, &HttpBackend::new(Duration::from_secs(5)), &cfg).unwrap_err();
    assert!(matches!(err, resumeflow::extract::ExtractError::BackendUnavailable(_)), "{err:?}");
}
