//! HTTP and WebSocket front end. Each session runs in its own actor task;
//! handlers only send it commands and relay the replies.

pub mod actor;
pub mod hub;
pub mod wire;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use neurofeed_core::maze::MazeView;
use neurofeed_core::session::{Phase, Session, SessionConfig, SessionError, SessionSnapshot, SurveyResponse};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};

use crate::source::SourceSpec;
use actor::{Actor, Clock, Command};
use hub::{Subscription, DEFAULT_FRAME_BUDGET};
use wire::{ErrorPayload, Outbound, WireMessage};

/// WebSocket close code for an unknown session id.
pub const CLOSE_UNKNOWN_SESSION: u16 = 4404;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            error: error.into(),
            field: None,
        }
    }

    pub fn bad_request(error: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, error)
    }

    pub fn conflict(error: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, error)
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown session")
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::Config { field, .. } => ApiError::bad_request(msg).with_field(field),
            SessionError::InvalidRating(field) => ApiError::bad_request(msg).with_field(field),
            SessionError::Signal(_) => ApiError::bad_request(msg),
            _ => ApiError::conflict(msg),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GatewayOptions {
    pub clock: Clock,
    pub frame_budget: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        GatewayOptions {
            clock: Clock::Realtime { speedup: 1.0 },
            frame_budget: DEFAULT_FRAME_BUDGET,
        }
    }
}

struct Handle {
    participant_code: String,
    commands: mpsc::Sender<Command>,
    phase: watch::Receiver<Phase>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    options: GatewayOptions,
    next_id: AtomicU64,
    sessions: Mutex<HashMap<String, Handle>>,
}

/// `POST /sessions` body: a flat session config plus an optional source.
#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    #[serde(flatten)]
    pub config: SessionConfig,
    #[serde(default)]
    pub source: SourceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManualValue {
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseReply {
    pub phase: Phase,
}

impl AppState {
    pub fn new(options: GatewayOptions) -> Self {
        AppState {
            inner: Arc::new(Inner {
                options,
                next_id: AtomicU64::new(1),
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// Validates the request and spawns the session's actor.
    pub fn create(&self, req: CreateRequest) -> Result<Created, ApiError> {
        let session = Session::new(req.config)?;
        let source = req
            .source
            .build()
            .map_err(|e| ApiError::bad_request(e.to_string()).with_field("source"))?;
        let code = session.config().participant_code.clone();

        let mut sessions = self.inner.sessions.lock().expect("session map lock");
        let duplicate = sessions
            .values()
            .any(|h| h.participant_code == code && *h.phase.borrow() != Phase::Complete);
        if duplicate {
            return Err(ApiError::conflict(format!(
                "participant `{code}` already has an active session"
            ))
            .with_field("participant_code"));
        }
        let id = format!("s{}", self.inner.next_id.fetch_add(1, Ordering::Relaxed));
        let (cmd_tx, cmd_rx) = mpsc::channel(64);
        let (phase_tx, phase_rx) = watch::channel(Phase::Idle);
        let actor = Actor::new(session, source, self.inner.options.frame_budget, phase_tx);
        tokio::spawn(actor.run(cmd_rx, self.inner.options.clock));
        sessions.insert(
            id.clone(),
            Handle {
                participant_code: code,
                commands: cmd_tx,
                phase: phase_rx,
            },
        );
        Ok(Created {
            session_id: id,
            phase: Phase::Idle,
        })
    }

    fn sender(&self, id: &str) -> Result<mpsc::Sender<Command>, ApiError> {
        let sessions = self.inner.sessions.lock().expect("session map lock");
        sessions
            .get(id)
            .map(|h| h.commands.clone())
            .ok_or_else(ApiError::not_found)
    }

    async fn call<T>(
        &self,
        id: &str,
        make: impl FnOnce(oneshot::Sender<T>) -> Command,
    ) -> Result<T, ApiError> {
        let tx = self.sender(id)?;
        let (reply_tx, reply_rx) = oneshot::channel();
        tx.send(make(reply_tx))
            .await
            .map_err(|_| ApiError::not_found())?;
        reply_rx.await.map_err(|_| ApiError::not_found())
    }

    pub async fn snapshot(&self, id: &str) -> Result<SessionSnapshot, ApiError> {
        self.call(id, Command::Snapshot).await
    }

    pub async fn advance(&self, id: &str) -> Result<Phase, ApiError> {
        self.call(id, Command::Advance).await?
    }

    pub async fn survey(&self, id: &str, resp: SurveyResponse) -> Result<(), ApiError> {
        self.call(id, |tx| Command::Survey(resp, tx)).await?
    }

    pub async fn manual(&self, id: &str, value: f64) -> Result<(), ApiError> {
        self.call(id, |tx| Command::Manual(value, tx)).await?
    }

    pub async fn export(&self, id: &str) -> Result<String, ApiError> {
        self.call(id, Command::Export).await
    }

    pub async fn maze(&self, id: &str) -> Result<MazeView, ApiError> {
        self.call(id, Command::Maze).await
    }

    pub async fn subscribe(&self, id: &str) -> Result<Subscription, ApiError> {
        self.call(id, Command::Subscribe).await
    }

    /// Runs up to `n` ticks immediately. Meant for [`Clock::Stepped`].
    pub async fn step(&self, id: &str, n: u64) -> Result<u64, ApiError> {
        self.call(id, |tx| Command::Step(n, tx)).await
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/survey", post(survey))
        .route("/sessions/{id}/manual", post(manual))
        .route("/sessions/{id}/export.csv", get(export_csv))
        .route("/sessions/{id}/maze.json", get(maze_json))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body?;
    Ok((StatusCode::CREATED, Json(state.create(req)?)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionSnapshot>, ApiError> {
    Ok(Json(state.snapshot(&id).await?))
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<PhaseReply>, ApiError> {
    let phase = state.advance(&id).await?;
    Ok(Json(PhaseReply { phase }))
}

async fn survey(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SurveyResponse>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(resp) = body?;
    state.survey(&id, resp).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn manual(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ManualValue>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(v) = body?;
    state.manual(&id, v.value).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn export_csv(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let csv = state.export(&id).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv))
}

async fn maze_json(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<MazeView>, ApiError> {
    Ok(Json(state.maze(&id).await?))
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Response {
    let sub = state.subscribe(&id).await;
    ws.on_upgrade(move |socket| async move {
        match sub {
            Ok(sub) => pump(socket, sub).await,
            Err(_) => reject(socket, &id).await,
        }
    })
}

fn text(msg: &WireMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("wire messages serialise").into())
}

async fn reject(mut socket: WebSocket, id: &str) {
    let msg = WireMessage {
        body: Outbound::Error(ErrorPayload {
            code: CLOSE_UNKNOWN_SESSION,
            message: format!("unknown session `{id}`"),
        }),
        seq: 0,
    };
    let _ = socket.send(text(&msg)).await;
    let _ = socket
        .send(Message::Close(Some(CloseFrame {
            code: CLOSE_UNKNOWN_SESSION,
            reason: "unknown session".into(),
        })))
        .await;
}

async fn pump(mut socket: WebSocket, mut sub: Subscription) {
    loop {
        tokio::select! {
            msg = sub.recv() => match msg {
                Some(m) => {
                    if socket.send(text(&m)).await.is_err() {
                        return;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, options: GatewayOptions) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "gateway listening");
    axum::serve(listener, router(AppState::new(options))).await
}
