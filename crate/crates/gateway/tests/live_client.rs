//! LiveClient against a local mock of the chat-completions endpoint.

use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use vitalchat_core::llm::{ClientError, ModelClient, ModelParams};
use vitalchat_gateway::LiveClient;

type Seen = Arc<Mutex<Vec<(Option<String>, Value)>>>;

async fn completions(State(seen): State<Seen>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let auth = headers
        .get("authorization")
        .map(|v| v.to_str().unwrap().to_owned());
    seen.lock().unwrap().push((auth, body.clone()));
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_owned();
    match prompt.as_str() {
        "overload" => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": {"message": "busy"}}))),
        "forbidden" => (StatusCode::BAD_REQUEST, Json(json!({"error": {"message": "bad request"}}))),
        "empty" => (StatusCode::OK, Json(json!({"choices": []}))),
        _ => (
            StatusCode::OK,
            Json(json!({"choices": [{"message": {"role": "assistant", "content": format!("echo: {prompt}")}}]})),
        ),
    }
}

fn spawn_mock() -> (String, Seen) {
    let seen: Seen = Arc::default();
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(seen.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}/v1"), seen)
}

#[test]
fn round_trip_and_error_mapping() {
    let (base, seen) = spawn_mock();
    let client = LiveClient::new(base, Some("k-123".into()), None).unwrap();
    let params = ModelParams::new("gpt-4o-mini", 0.3, 1.0).unwrap();

    assert_eq!(client.complete("hello", &params).unwrap(), "echo: hello");
    {
        let seen = seen.lock().unwrap();
        let (auth, body) = &seen[0];
        assert_eq!(auth.as_deref(), Some("Bearer k-123"));
        assert_eq!(body["model"], "gpt-4o-mini");
        assert_eq!(body["temperature"], 0.3);
    }

    assert!(matches!(client.complete("overload", &params), Err(ClientError::Unavailable(m)) if m.contains("busy")));
    assert!(matches!(client.complete("forbidden", &params), Err(ClientError::Rejected(_))));
    assert!(matches!(client.complete("empty", &params), Err(ClientError::Rejected(_))));

    client.complete("qc", &ModelParams::for_model("o1")).unwrap();
    let last = seen.lock().unwrap().last().unwrap().1.clone();
    assert_eq!(last["model"], "o1");
    assert!(last.get("temperature").is_none());
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let client = LiveClient::new("http://127.0.0.1:1/v1", None, None).unwrap();
    let r = client.complete("x", &ModelParams::for_model("gpt-4o-mini"));
    assert!(matches!(r, Err(ClientError::Unavailable(_))));
}
