use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use demoflow_core::dom::Corpus;
use demoflow_core::semantics::{HashedEmbedder, Lexicon};
use demoflow_core::session::{Session, SessionConfig, SessionSnapshot};
use demoflow_service::{router, AppState, SessionHandle};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn food() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/food")
}

fn app() -> Router {
    let corpus = Arc::new(Corpus::open(&food().join("corpus")).unwrap());
    let lexicon = Lexicon::load(&food().join("lexicon.txt")).unwrap();
    let session = Session::new(corpus.clone(), Arc::new(HashedEmbedder::new(lexicon)), SessionConfig::default()).unwrap();
    router(AppState {
        session: SessionHandle::spawn(session),
        corpus,
    })
}

fn input() -> Value {
    serde_json::from_str(&std::fs::read_to_string(food().join("input.json")).unwrap()).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn command(app: &Router, cmd: Value) -> (StatusCode, Value) {
    let (status, body) = call(app, "POST", "/session/command", Some(cmd.to_string())).await;
    (status, serde_json::from_str(&body).unwrap())
}

/// Read SSE frames until `n` snapshot events have arrived.
async fn read_snapshots(body: &mut Body, n: usize) -> Vec<SessionSnapshot> {
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < n {
        let frame = body.frame().await.expect("stream open").unwrap();
        let Ok(data) = frame.into_data() else { continue };
        buf.push_str(std::str::from_utf8(&data).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let event: String = buf.drain(..end + 2).collect();
            if let Some(line) = event.lines().find_map(|l| l.strip_prefix("data: ")) {
                out.push(serde_json::from_str(line).unwrap());
            }
        }
    }
    out
}

#[tokio::test]
async fn corpus_pages_are_served() {
    let app = app();
    let (status, body) = call(&app, "GET", "/corpus/page/home", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("<input"), "{body}");
    let (status, body) = call(&app, "GET", "/corpus/page/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body.contains("UnknownPage"));
}

#[tokio::test]
async fn upload_then_record() {
    let app = app();
    let (status, body) = call(&app, "POST", "/session/input", Some(input().to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["seq"], 1);
    let (status, ack) = command(&app, json!({"command": "start-recording"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["seq"], 2);
    let (_, body) = call(&app, "GET", "/session/snapshot", None).await;
    let snap: SessionSnapshot = serde_json::from_str(&body).unwrap();
    assert_eq!(snap.seq, 2);
    assert_eq!(snap.rows.len(), 10);
    assert_eq!(snap.carousel.step, Some(0));
}

#[tokio::test]
async fn errors_carry_their_kind() {
    let app = app();
    let (status, err) = command(&app, json!({"command": "dance"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "UnknownCommand");
    let (status, err) = command(&app, json!({"command": "edit-step", "row": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "BadCommand");
    let (status, err) = command(&app, json!({"command": "advance"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "WrongMode");
    let (status, body) = call(&app, "POST", "/session/input", Some("[]".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body.contains("EmptyInput"));
    let (status, body) = call(&app, "POST", "/session/input", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body.contains("InvalidInput"));
    // Rejections do not advance the sequence number.
    let (_, body) = call(&app, "GET", "/session/snapshot", None).await;
    assert_eq!(serde_json::from_str::<SessionSnapshot>(&body).unwrap().seq, 0);
}

#[tokio::test]
async fn closed_session_refuses_everything() {
    let app = app();
    let (status, _) = call(&app, "POST", "/session/close", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, err) = command(&app, json!({"command": "start-recording"})).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(err["error"], "SessionClosed");
    let (status, body) = call(&app, "GET", "/session/stream", None).await;
    assert_eq!(status, StatusCode::GONE);
    assert!(body.contains("SessionClosed"));
    let (status, _) = call(&app, "POST", "/session/close", None).await;
    assert_eq!(status, StatusCode::GONE);
}

#[tokio::test]
async fn late_subscriber_sees_current_snapshot_first() {
    let app = app();
    call(&app, "POST", "/session/input", Some(input().to_string())).await;
    command(&app, json!({"command": "start-recording"})).await;

    let req = Request::builder().uri("/session/stream").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    let first = read_snapshots(&mut body, 1).await;
    assert_eq!(first[0].seq, 2);

    command(&app, json!({"command": "user-event", "kind": "input", "target": "body[1]/input[1]", "payload": "Pad Thai"})).await;
    command(&app, json!({"command": "advance"})).await;
    command(&app, json!({"command": "dance"})).await;
    command(&app, json!({"command": "rewind"})).await;
    let later = read_snapshots(&mut body, 3).await;
    let seqs: Vec<u64> = later.iter().map(|s| s.seq).collect();
    assert_eq!(seqs, [3, 4, 5]);
}

#[tokio::test]
async fn stream_ends_when_session_closes() {
    let app = app();
    let req = Request::builder().uri("/session/stream").body(Body::empty()).unwrap();
    let mut body = app.clone().oneshot(req).await.unwrap().into_body();
    read_snapshots(&mut body, 1).await;
    call(&app, "POST", "/session/close", None).await;
    while let Some(frame) = body.frame().await {
        let frame = frame.unwrap();
        if let Ok(data) = frame.into_data() {
            assert!(!std::str::from_utf8(&data).unwrap().contains("data:"));
        }
    }
}
