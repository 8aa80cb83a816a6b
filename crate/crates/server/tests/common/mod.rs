#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use futuresim_core::content::ContentDir;
use futuresim_server::{Frame, FrameKind, Hub};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub const FRAME_TIMEOUT: Duration = Duration::from_secs(10);

pub struct Server {
    pub base: String,
    pub ws_base: String,
    pub hub: Arc<Hub>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<std::io::Result<()>>>,
}

impl Server {
    pub async fn start(hub: Arc<Hub>) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (stop, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(futuresim_server::serve(listener, hub.clone(), async {
            let _ = rx.await;
        }));
        Self {
            base: format!("http://{addr}"),
            ws_base: format!("ws://{addr}"),
            hub,
            stop: Some(stop),
            task: Some(task),
        }
    }

    pub async fn in_memory() -> Self {
        Self::start(Hub::in_memory(ContentDir::new(None))).await
    }

    pub async fn on_disk(dir: &Path) -> Self {
        let (hub, failed) = Hub::open(ContentDir::new(None), dir.to_owned()).await.unwrap();
        assert!(failed.is_empty(), "{failed:?}");
        Self::start(hub).await
    }

    /// Graceful shutdown: waits for the server to persist and exit.
    pub async fn shutdown(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.take().unwrap().await.unwrap().unwrap();
    }

    /// Stops accepting connections without the shutdown persist.
    pub fn kill(mut self) {
        self.task.take().unwrap().abort();
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

pub struct Client {
    pub http: reqwest::Client,
    pub base: String,
}

pub struct Created {
    pub id: String,
    pub facilitator: String,
    pub codes: BTreeMap<String, String>,
}

impl Client {
    pub fn new(server: &Server) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: server.base.clone(),
        }
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> (u16, Value) {
        let mut req = self.http.post(format!("{}{path}", self.base)).json(&body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> (u16, String) {
        let mut req = self.http.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        (resp.status().as_u16(), resp.text().await.unwrap())
    }

    pub async fn get_json(&self, path: &str, token: Option<&str>) -> (u16, Value) {
        let (status, text) = self.get(path, token).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub async fn create(&self, seed: u64) -> Created {
        let (status, body) = self
            .post("/api/sessions", None, json!({ "config": { "seed": seed } }))
            .await;
        assert_eq!(status, 201, "{body}");
        Created {
            id: body["session_id"].as_str().unwrap().to_owned(),
            facilitator: body["facilitator_token"].as_str().unwrap().to_owned(),
            codes: serde_json::from_value(body["join_codes"].clone()).unwrap(),
        }
    }

    /// Joins `role` and returns its player token.
    pub async fn join(&self, c: &Created, role: &str) -> String {
        let (status, body) = self
            .post(
                &format!("/api/sessions/{}/join", c.id),
                None,
                json!({ "join_code": c.codes[role] }),
            )
            .await;
        assert_eq!(status, 200, "{body}");
        body["player_token"].as_str().unwrap().to_owned()
    }

    pub async fn command(&self, c: &Created, token: &str, cmd: Value) -> (u16, Value) {
        self.post(&format!("/api/sessions/{}/commands", c.id), Some(token), cmd)
            .await
    }

    pub async fn view(&self, c: &Created, token: &str, since: u64) -> Value {
        let (status, body) = self
            .get_json(&format!("/api/sessions/{}/view?since={since}", c.id), Some(token))
            .await;
        assert_eq!(status, 200, "{body}");
        body
    }
}

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn connect(server: &Server, id: &str, token: &str, since: u64) -> Ws {
    let url = format!("{}/api/sessions/{id}/ws?token={token}&since={since}", server.ws_base);
    let (ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    ws
}

pub async fn send(ws: &mut Ws, frame: &Frame) {
    ws.send(Message::Text(frame.encode().into())).await.unwrap();
}

pub async fn hello(ws: &mut Ws, protocol: u32) {
    send(ws, &Frame::new(0, FrameKind::Hello, json!({ "protocol": protocol }))).await;
}

/// The next frame, or `None` once the socket closes.
pub async fn next_frame(ws: &mut Ws) -> Option<Frame> {
    loop {
        let msg = tokio::time::timeout(FRAME_TIMEOUT, ws.next())
            .await
            .expect("frame within timeout");
        match msg {
            Some(Ok(Message::Text(t))) => return Some(Frame::decode(&t).unwrap()),
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return None,
            Some(Ok(_)) => continue,
        }
    }
}

/// Reads frames until one of `kind` with `seq` arrives; returns everything read.
pub async fn until(ws: &mut Ws, kind: FrameKind, seq: u64) -> Vec<Frame> {
    let mut out = Vec::new();
    loop {
        let f = next_frame(ws).await.expect("socket open");
        let done = f.kind == kind && f.seq == seq;
        out.push(f);
        if done {
            return out;
        }
    }
}
