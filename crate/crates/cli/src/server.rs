//! HTTP front end for [`SessionStore`].
//!
//! | method | path                        | body                 | reply          |
//! |--------|-----------------------------|----------------------|----------------|
//! | POST   | `/sessions`                 | `CreateSession`      | `SessionInfo`  |
//! | GET    | `/sessions`                 |                      | session ids    |
//! | POST   | `/sessions/{id}/turns`      | `TurnRequest`        | `TurnResponse` |
//! | POST   | `/sessions/{id}/reactions`  | `{"reaction": ...}`  | `Diagnostics`  |
//! | GET    | `/sessions/{id}/trace`      |                      | `TraceLog`     |
//! | GET    | `/sessions/{id}/diagnostics`|                      | `Diagnostics`  |
//! | GET    | `/sessions/{id}/events`     | WebSocket upgrade    | `SessionEvent` stream |
//!
//! Errors come back as `{"error": kind, "message": text}` with 404 for an
//! unknown session, 409 for a session that is busy or a reaction out of
//! turn, and 400 for anything malformed.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use grounding::control::{ControlError, Reaction};
use grounding::service::{CreateSession, ServiceError, SessionStore, TurnRequest};
use grounding::session::{Diagnostics, SessionError};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

const EVENT_BUFFER: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Sent once when a subscriber connects.
    Snapshot,
    Turn,
    Reaction,
}

/// One message on a session's event stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session: String,
    pub kind: EventKind,
    pub diagnostics: Diagnostics,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<SessionStore>,
    events: broadcast::Sender<SessionEvent>,
}

impl AppState {
    pub fn new(store: SessionStore) -> Self {
        Self { store: Arc::new(store), events: broadcast::channel(EVENT_BUFFER).0 }
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    fn publish(&self, session: &str, kind: EventKind, diagnostics: Diagnostics) {
        // No subscribers is fine.
        let _ = self.events.send(SessionEvent { session: session.into(), kind, diagnostics });
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, kind) = match &e {
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::Busy(_) => (StatusCode::CONFLICT, "busy"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::Session(SessionError::Control(
                ControlError::NoTurns
                | ControlError::NotLatest { .. }
                | ControlError::AlreadyReacted(_)
                | ControlError::PendingReaction,
            )) => (StatusCode::CONFLICT, "reaction"),
            ServiceError::Session(_) => (StatusCode::BAD_REQUEST, "invalid"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self { status: StatusCode::BAD_REQUEST, kind: "bad_request", message: e.body_text() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.kind, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
struct ReactionRequest {
    reaction: Reaction,
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<grounding::service::SessionInfo>), ApiError> {
    let Json(req) = body?;
    Ok((StatusCode::CREATED, Json(app.store.create_session(&req)?)))
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.store.session_ids())
}

async fn post_turn(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<TurnRequest>, JsonRejection>,
) -> ApiResult<grounding::service::TurnResponse> {
    let Json(req) = body?;
    let response = app.store.post_turn(&id, &req)?;
    app.publish(&id, EventKind::Turn, response.diagnostics.clone());
    Ok(Json(response))
}

async fn post_reaction(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ReactionRequest>, JsonRejection>,
) -> ApiResult<Diagnostics> {
    let Json(req) = body?;
    let diagnostics = app.store.post_reaction(&id, req.reaction)?;
    app.publish(&id, EventKind::Reaction, diagnostics.clone());
    Ok(Json(diagnostics))
}

async fn get_trace(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<grounding::simkit::TraceLog> {
    Ok(Json(app.store.get_trace(&id)?))
}

async fn get_diagnostics(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Diagnostics> {
    Ok(Json(app.store.diagnostics(&id)?))
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    // Subscribe before the snapshot so no turn falls between them.
    let rx = app.events.subscribe();
    let snapshot = app.store.diagnostics(&id)?;
    let first = SessionEvent { session: id.clone(), kind: EventKind::Snapshot, diagnostics: snapshot };
    Ok(ws.on_upgrade(move |socket| stream_events(socket, id, first, rx)))
}

async fn stream_events(
    mut socket: WebSocket,
    id: String,
    first: SessionEvent,
    mut rx: broadcast::Receiver<SessionEvent>,
) {
    let encode = |e: &SessionEvent| Message::Text(serde_json::to_string(e).expect("event serializes").into());
    if socket.send(encode(&first)).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Ok(e) if e.session == id => {
                    if socket.send(encode(&e)).await.is_err() {
                        return;
                    }
                }
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/reactions", post(post_reaction))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/diagnostics", get(get_diagnostics))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Serve until ctrl-c.
pub async fn serve(store: SessionStore, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
