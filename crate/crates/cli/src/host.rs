use std::io::Write;

use futuresim_core::content::ContentDir;
use futuresim_server::Hub;
use serde_json::json;

use crate::{CmdResult, Failure, HostArgs};

/// Resolves on SIGINT or SIGTERM. Handlers are installed before this
/// returns, so a signal sent right after startup is not lost.
fn shutdown_signal() -> std::io::Result<impl std::future::Future<Output = ()>> {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut int = signal(SignalKind::interrupt())?;
        let mut term = signal(SignalKind::terminate())?;
        Ok(async move {
            tokio::select! {
                _ = int.recv() => {}
                _ = term.recv() => {}
            }
            tracing::info!("shutting down; persisting sessions");
        })
    }
    #[cfg(not(unix))]
    {
        Ok(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down; persisting sessions");
        })
    }
}

pub fn run(args: &HostArgs, json: bool) -> CmdResult {
    let rt = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::new(1, format!("cannot start runtime: {e}")))?;
    rt.block_on(async {
        let shutdown = shutdown_signal()
            .map_err(|e| Failure::new(1, format!("cannot install signal handlers: {e}")))?;
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .map_err(|e| Failure::new(1, format!("cannot bind {}: {e}", args.bind)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Failure::new(1, e.to_string()))?;
        let content = ContentDir::new(args.content_dir.clone());
        let (hub, failed) = Hub::open(content, args.data_dir.clone()).await.map_err(|e| {
            Failure::new(1, format!("cannot open {}: {e}", args.data_dir.display()))
        })?;
        for (id, e) in &failed {
            tracing::warn!("session {id} skipped: {e}");
        }
        let restored = hub.list().await.len();
        if json {
            println!(
                "{}",
                json!({
                    "listening": format!("http://{addr}"),
                    "data_dir": args.data_dir,
                    "restored": restored,
                    "skipped": failed.iter().map(|(id, _)| id).collect::<Vec<_>>(),
                })
            );
        } else {
            println!("listening on http://{addr}");
            println!("data in {}, {restored} session(s) restored", args.data_dir.display());
        }
        let _ = std::io::stdout().flush();
        futuresim_server::serve(listener, hub, shutdown)
            .await
            .map_err(|e| Failure::new(1, format!("server error: {e}")))
    })
}
