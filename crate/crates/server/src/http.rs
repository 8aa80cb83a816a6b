//! HTTP and WebSocket endpoints.
//!
//! | method | path | auth |
//! |---|---|---|
//! | GET | `/api/protocol` | none |
//! | GET | `/api/scenarios` | none |
//! | GET, POST | `/api/sessions` | none |
//! | GET | `/api/sessions/{id}/lobby` | none |
//! | POST | `/api/sessions/{id}/join` | join code in body |
//! | POST | `/api/sessions/{id}/commands` | bearer token |
//! | GET | `/api/sessions/{id}/view?since=` | bearer token |
//! | GET | `/api/sessions/{id}/log` | bearer token |
//! | GET | `/api/sessions/{id}/debrief` | bearer token |
//! | GET | `/api/sessions/{id}/ws?token=&since=` | token in query |
//!
//! Errors are JSON [`Nack`] bodies.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use futuresim_core::GameError;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::hub::{Hub, SessionConfig, SessionHandle};
use crate::protocol::{ClientHello, Command, Frame, FrameKind, PROTOCOL_VERSION};
use crate::session::{Principal, SessionError};

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        ApiError(e.into())
    }
}

pub fn status_of(e: &SessionError) -> StatusCode {
    match e {
        SessionError::UnknownScenario(_) | SessionError::UnknownSession | SessionError::UnknownCode => {
            StatusCode::NOT_FOUND
        }
        SessionError::CodeClaimed | SessionError::SessionRunning | SessionError::SessionNotRunning => {
            StatusCode::CONFLICT
        }
        SessionError::UnknownToken => StatusCode::UNAUTHORIZED,
        SessionError::NoRole | SessionError::Game(GameError::NotFacilitator) => StatusCode::FORBIDDEN,
        SessionError::InvalidScenario(_) | SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
        SessionError::Game(_) => StatusCode::UNPROCESSABLE_ENTITY,
        SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        SessionError::Closed => StatusCode::SERVICE_UNAVAILABLE,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_of(&self.0), Json(self.0.nack())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/api/protocol", get(protocol))
        .route("/api/scenarios", get(scenarios))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}/lobby", get(lobby))
        .route("/api/sessions/{id}/join", post(join))
        .route("/api/sessions/{id}/commands", post(command))
        .route("/api/sessions/{id}/view", get(view))
        .route("/api/sessions/{id}/log", get(log))
        .route("/api/sessions/{id}/debrief", get(debrief))
        .route("/api/sessions/{id}/ws", get(ws))
        .with_state(hub)
}

async fn protocol() -> Json<Value> {
    Json(json!({ "protocol": PROTOCOL_VERSION }))
}

async fn scenarios(State(hub): State<Arc<Hub>>) -> Json<Vec<String>> {
    Json(hub.content().list())
}

async fn list_sessions(State(hub): State<Arc<Hub>>) -> Json<Value> {
    Json(json!(hub.list().await))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default = "default_scenario_id")]
    scenario_id: String,
    #[serde(default)]
    config: SessionConfig,
}

fn default_scenario_id() -> String {
    futuresim_core::content::DEFAULT_SCENARIO_ID.to_owned()
}

async fn create_session(
    State(hub): State<Arc<Hub>>,
    Json(req): Json<CreateRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let created = hub.create(&req.scenario_id, req.config).await?;
    Ok((StatusCode::CREATED, Json(json!(created))))
}

async fn lobby(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let h = hub.get(&id).await?;
    Ok(Json(json!(h.run(|s| s.lobby()).await?)))
}

#[derive(Deserialize)]
struct JoinRequest {
    join_code: String,
}

async fn join(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    Json(req): Json<JoinRequest>,
) -> ApiResult<Json<Value>> {
    let h = hub.get(&id).await?;
    let joined = h.run(move |s| s.join(&req.join_code)).await??;
    Ok(Json(json!(joined)))
}

fn bearer(headers: &HeaderMap) -> Result<String, SessionError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::to_owned)
        .ok_or(SessionError::UnknownToken)
}

async fn authed(
    hub: &Hub,
    id: &str,
    headers: &HeaderMap,
) -> Result<(SessionHandle, Principal), SessionError> {
    let h = hub.get(id).await?;
    let token = bearer(headers)?;
    let who = h.run(move |s| s.authenticate(&token)).await??;
    Ok((h, who))
}

async fn command(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(cmd): Json<Command>,
) -> ApiResult<Json<Value>> {
    let (h, who) = authed(&hub, &id, &headers).await?;
    Ok(Json(h.run(move |s| s.command(&who, cmd)).await??))
}

#[derive(Deserialize)]
struct SinceQuery {
    #[serde(default)]
    since: u64,
}

async fn view(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    Query(q): Query<SinceQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let (h, who) = authed(&hub, &id, &headers).await?;
    Ok(Json(h.run(move |s| s.view(&who, q.since)).await??))
}

async fn log(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let (h, who) = authed(&hub, &id, &headers).await?;
    let text = h.run(move |s| s.log_text(&who)).await??;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn debrief(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let (h, _) = authed(&hub, &id, &headers).await?;
    Ok(Json(json!(h.run(|s| s.debrief_report()).await??)))
}

#[derive(Deserialize)]
struct WsQuery {
    token: String,
    #[serde(default)]
    since: u64,
}

async fn ws(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    Query(q): Query<WsQuery>,
    upgrade: WebSocketUpgrade,
) -> ApiResult<Response> {
    let h = hub.get(&id).await?;
    let token = q.token;
    let who = h.run(move |s| s.authenticate(&token)).await??;
    Ok(upgrade.on_upgrade(move |socket| connection(socket, h, who, q.since)))
}

fn error_frame(seq: u64, message: impl Into<String>) -> Frame {
    Frame::new(
        seq,
        FrameKind::Error,
        SessionError::BadRequest(message.into()).nack(),
    )
}

async fn connection(socket: WebSocket, handle: SessionHandle, who: Principal, since: u64) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Frame>();
    let sub_tx = tx.clone();
    let sub_who = who.clone();
    let Ok(sub) = handle.run(move |s| s.subscribe(sub_who, since, sub_tx)).await else {
        return;
    };
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if sink.send(Message::Text(frame.encode().into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    let mut greeted = false;
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let frame = match Frame::decode(&text) {
            Ok(f) => f,
            Err(e) => {
                let _ = tx.send(error_frame(0, format!("malformed frame: {e}")));
                continue;
            }
        };
        match frame.kind {
            FrameKind::Hello => match serde_json::from_value::<ClientHello>(frame.payload) {
                Ok(h) if h.protocol == PROTOCOL_VERSION => greeted = true,
                Ok(h) => {
                    let _ = tx.send(error_frame(
                        frame.seq,
                        format!("protocol {} not supported; server speaks {PROTOCOL_VERSION}", h.protocol),
                    ));
                    break;
                }
                Err(e) => {
                    let _ = tx.send(error_frame(frame.seq, format!("bad hello: {e}")));
                    break;
                }
            },
            FrameKind::Command if !greeted => {
                let _ = tx.send(error_frame(frame.seq, "send hello first"));
            }
            FrameKind::Command => {
                let reply = match serde_json::from_value::<Command>(frame.payload) {
                    Ok(cmd) => {
                        let who = who.clone();
                        match handle.run(move |s| s.command(&who, cmd)).await {
                            Ok(Ok(v)) => Frame::new(frame.seq, FrameKind::Ack, v),
                            Ok(Err(e)) | Err(e) => Frame::new(frame.seq, FrameKind::Nack, e.nack()),
                        }
                    }
                    Err(e) => Frame::new(
                        frame.seq,
                        FrameKind::Nack,
                        SessionError::BadRequest(format!("bad command: {e}")).nack(),
                    ),
                };
                let _ = tx.send(reply);
            }
            _ => {
                let _ = tx.send(error_frame(frame.seq, "unexpected frame kind"));
            }
        }
    }
    let _ = handle.run(move |s| s.unsubscribe(sub)).await;
    drop(tx);
    let _ = writer.await;
}
