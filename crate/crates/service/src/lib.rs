//! HTTP front end for one session.
//!
//! A single task owns the [`Session`]; handlers talk to it over a channel, so
//! commands are applied strictly in arrival order. Every accepted command
//! publishes a snapshot. When the session is in `FullAuto` and the tick rate
//! is non-zero, the owner also ticks on a timer; a rate of 0 means automation
//! only advances on explicit `tick`/`run` commands.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use demoflow_core::dom::Corpus;
use demoflow_core::session::{Ack, Command, Mode, Session, SessionError, SessionSnapshot};
use futures::stream::{self, Stream, StreamExt};
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot};

enum Request {
    Command(Command, oneshot::Sender<Result<Ack, SessionError>>),
    Subscribe(oneshot::Sender<(SessionSnapshot, broadcast::Receiver<SessionSnapshot>)>),
    Transcript(oneshot::Sender<String>),
    Close(oneshot::Sender<()>),
}

/// Cheap handle to the task that owns the session.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Request>,
}

impl SessionHandle {
    /// Move `session` into a new task. Must be called inside a tokio runtime.
    pub fn spawn(session: Session) -> Self {
        let (tx, rx) = mpsc::channel(64);
        tokio::spawn(own(session, rx));
        Self { tx }
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Result<T, SessionError> {
        let (reply, wait) = oneshot::channel();
        self.tx
            .send(make(reply))
            .await
            .map_err(|_| SessionError::SessionClosed)?;
        wait.await.map_err(|_| SessionError::SessionClosed)
    }

    pub async fn send(&self, command: Command) -> Result<Ack, SessionError> {
        self.ask(|r| Request::Command(command, r)).await?
    }

    /// The current snapshot plus a receiver for every later one.
    pub async fn subscribe(
        &self,
    ) -> Result<(SessionSnapshot, broadcast::Receiver<SessionSnapshot>), SessionError> {
        self.ask(Request::Subscribe).await
    }

    pub async fn transcript(&self) -> Result<String, SessionError> {
        self.ask(Request::Transcript).await
    }

    /// Stop the owner task. Later calls fail with `SessionClosed`.
    pub async fn close(&self) -> Result<(), SessionError> {
        self.ask(Request::Close).await
    }
}

async fn own(mut session: Session, mut rx: mpsc::Receiver<Request>) {
    let (events, _) = broadcast::channel::<SessionSnapshot>(256);
    loop {
        let ticking = session.mode() == Mode::FullAuto && !session.is_completed() && session.tick_ms() > 0;
        let delay = tokio::time::sleep(Duration::from_millis(session.tick_ms()));
        tokio::select! {
            req = rx.recv() => match req {
                None => break,
                Some(Request::Close(reply)) => {
                    let _ = reply.send(());
                    break;
                }
                Some(Request::Command(cmd, reply)) => {
                    let result = session.handle(cmd);
                    if result.is_ok() {
                        let _ = events.send(session.snapshot());
                    }
                    let _ = reply.send(result);
                }
                Some(Request::Subscribe(reply)) => {
                    let _ = reply.send((session.snapshot(), events.subscribe()));
                }
                Some(Request::Transcript(reply)) => {
                    let _ = reply.send(session.transcript_jsonl());
                }
            },
            _ = delay, if ticking => {
                if session.handle(Command::Tick).is_ok() {
                    let _ = events.send(session.snapshot());
                }
            }
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub session: SessionHandle,
    pub corpus: Arc<Corpus>,
}

/// JSON error body with the variant name under `error`.
pub struct ApiError(pub SessionError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::UnknownCommand(_) | SessionError::BadCommand(_) => StatusCode::BAD_REQUEST,
            SessionError::SessionClosed => StatusCode::GONE,
            SessionError::EmptyInput
            | SessionError::NonRectangular { .. }
            | SessionError::InvalidInput(_)
            | SessionError::InvalidEdit
            | SessionError::BadIndex { .. }
            | SessionError::MissingTarget(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::CONFLICT,
        };
        let body = json!({ "error": self.0.kind(), "message": self.0.to_string() });
        (status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session/input", post(upload_input))
        .route("/session/command", post(command))
        .route("/session/stream", get(stream_snapshots))
        .route("/session/snapshot", get(snapshot))
        .route("/session/transcript", get(transcript))
        .route("/session/close", post(close))
        .route("/corpus/page/{id}", get(page))
        .with_state(state)
}

async fn upload_input(State(s): State<AppState>, body: Bytes) -> Result<Json<Ack>, ApiError> {
    let rows: Value = serde_json::from_slice(&body).map_err(|e| SessionError::InvalidInput(e.to_string()))?;
    Ok(Json(s.session.send(Command::UploadInput { rows }).await?))
}

async fn command(State(s): State<AppState>, body: Bytes) -> Result<Json<Ack>, ApiError> {
    let value: Value = serde_json::from_slice(&body).map_err(|e| SessionError::BadCommand(e.to_string()))?;
    let cmd = Command::from_json(&value)?;
    Ok(Json(s.session.send(cmd).await?))
}

async fn snapshot(State(s): State<AppState>) -> Result<Json<SessionSnapshot>, ApiError> {
    Ok(Json(s.session.subscribe().await?.0))
}

async fn transcript(State(s): State<AppState>) -> Result<Response, ApiError> {
    let body = s.session.transcript().await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn close(State(s): State<AppState>) -> Result<StatusCode, ApiError> {
    s.session.close().await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn page(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    match s.corpus.source(&id) {
        Some(src) => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], src.to_string()).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": "UnknownPage", "message": format!("no page \"{id}\"") })),
        )
            .into_response(),
    }
}

/// Snapshots as they are published, current one first. Lagging subscribers
/// skip ahead; the stream ends when the session closes.
pub fn snapshot_stream(
    first: SessionSnapshot,
    rx: broadcast::Receiver<SessionSnapshot>,
) -> impl Stream<Item = SessionSnapshot> {
    let last = first.seq;
    let rest = stream::unfold((rx, last), |(mut rx, last)| async move {
        loop {
            match rx.recv().await {
                Ok(snap) if snap.seq > last => {
                    let seq = snap.seq;
                    return Some((snap, (rx, seq)));
                }
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    stream::once(async move { first }).chain(rest)
}

async fn stream_snapshots(
    State(s): State<AppState>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let (first, rx) = s.session.subscribe().await?;
    let events = snapshot_stream(first, rx).map(|snap| {
        Ok(Event::default()
            .event("snapshot")
            .id(snap.seq.to_string())
            .json_data(&snap)
            .expect("snapshot serializes"))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Serve `state` on `addr` until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
