//! The commands a scripted run sends are replayed over HTTP; the service must
//! end in the same place.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use demoflow_cli::{execute, Scenario};
use demoflow_core::dom::Corpus;
use demoflow_core::semantics::{HashedEmbedder, Lexicon};
use demoflow_core::session::{Command, Mode, Session, SessionSnapshot, TranscriptEntry};
use demoflow_service::{router, AppState, SessionHandle};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}/scenario.toml"));
    Scenario::load(&path).unwrap()
}

fn app(s: &Scenario) -> Router {
    let corpus = Arc::new(Corpus::open(&s.corpus).unwrap());
    let lexicon = Lexicon::load(s.lexicon.as_ref().unwrap()).unwrap();
    let session = Session::new(corpus.clone(), Arc::new(HashedEmbedder::new(lexicon)), s.config()).unwrap();
    router(AppState {
        session: SessionHandle::spawn(session),
        corpus,
    })
}

async fn post(app: &Router, uri: &str, body: String) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get_text(app: &Router, uri: &str) -> String {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    String::from_utf8(bytes.to_vec()).unwrap()
}

async fn snapshot(app: &Router) -> SessionSnapshot {
    serde_json::from_str(&get_text(app, "/session/snapshot").await).unwrap()
}

async fn send(app: &Router, cmd: &Command) -> (StatusCode, Value) {
    match cmd {
        Command::UploadInput { rows } => post(app, "/session/input", rows.to_string()).await,
        c => post(app, "/session/command", serde_json::to_string(c).unwrap()).await,
    }
}

fn finished_rows(transcript: &[TranscriptEntry]) -> Vec<TranscriptEntry> {
    transcript
        .iter()
        .filter(|e| matches!(e, TranscriptEntry::RowFinished { .. }))
        .cloned()
        .collect()
}

#[tokio::test]
async fn scripted_commands_replay_to_identical_transcript() {
    for name in ["food", "shopping", "pharmacy", "ticketing"] {
        let s = scenario(name);
        let local = execute(&s).unwrap();
        let app = app(&s);
        let mut last_seq = 0;
        for cmd in &local.commands {
            let (status, ack) = send(&app, cmd).await;
            assert_eq!(status, StatusCode::OK, "{name}: {} -> {ack}", cmd.name());
            let seq = ack["seq"].as_u64().unwrap();
            assert!(seq > last_seq);
            last_seq = seq;
        }
        let remote = get_text(&app, "/session/transcript").await;
        assert_eq!(remote, local.session.transcript_jsonl(), "{name}");
        let snap = snapshot(&app).await;
        assert!(snap.completed, "{name}");
        assert_eq!(snap.seq, local.session.seq());
    }
}

/// With a tick rate the service runs automation by itself; the script's
/// explicit `run` commands are dropped and the client waits instead.
#[tokio::test]
async fn timer_driven_automation_matches_scripted_run() {
    let s = scenario("food");
    let local = execute(&s).unwrap();
    let app = app(&s);
    let (status, _) = post(&app, "/session/command", r#"{"command":"tick-rate","ms":1}"#.into()).await;
    assert_eq!(status, StatusCode::OK);
    for cmd in local.commands.iter().filter(|c| !matches!(c, Command::Run)) {
        loop {
            let (status, body) = send(&app, cmd).await;
            if status == StatusCode::OK {
                break;
            }
            // Automation has not reached the point the command expects yet.
            assert_eq!(body["error"], "WrongMode", "{}: {body}", cmd.name());
            assert_eq!(snapshot(&app).await.mode, Mode::FullAuto);
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
    }
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while !snapshot(&app).await.completed {
        assert!(tokio::time::Instant::now() < deadline, "automation did not finish");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let remote: Vec<TranscriptEntry> = get_text(&app, "/session/transcript")
        .await
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(finished_rows(&remote), finished_rows(local.session.transcript()));
    assert!(remote
        .iter()
        .any(|e| matches!(e, TranscriptEntry::Command { command: Command::Tick, .. })));
}
