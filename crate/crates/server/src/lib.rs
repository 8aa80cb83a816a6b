//! Live multiplayer sessions for futuresim: lobby and join codes, one
//! command queue per game, per-role filtered event push over WebSocket, and
//! crash-safe persistence.

pub mod http;
pub mod hub;
pub mod protocol;
pub mod session;
pub mod store;

use std::future::Future;
use std::sync::Arc;

pub use hub::{Hub, SessionConfig, SessionHandle};
pub use protocol::{Command, Frame, FrameKind, SessionStatus, PROTOCOL_VERSION};
pub use session::{Principal, Session, SessionError};

pub const BIND_ADDR_ENV: &str = "FUTURESIM_BIND_ADDR";
pub const DATA_DIR_ENV: &str = "FUTURESIM_DATA_DIR";
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

/// Serves until `shutdown` resolves, then persists every session.
pub async fn serve(
    listener: tokio::net::TcpListener,
    hub: Arc<Hub>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, http::router(hub.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    for (id, e) in hub.persist_all().await {
        tracing::error!("session {id} not persisted: {e}");
    }
    Ok(())
}
