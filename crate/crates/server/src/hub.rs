//! Session registry. Each session runs behind its own queue: jobs are
//! executed one at a time, in arrival order, on the blocking pool (they may
//! fsync).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use futuresim_core::content::{ContentDir, LoadError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, RwLock};

use crate::session::{Created, Session, SessionError, SessionSummary};
use crate::store::SessionStore;

type Job = Box<dyn FnOnce(&mut Session) + Send>;

#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    jobs: mpsc::UnboundedSender<Job>,
}

impl SessionHandle {
    fn spawn(session: Session) -> Self {
        let id = session.id().to_owned();
        let (jobs, mut rx) = mpsc::unbounded_channel::<Job>();
        tokio::spawn(async move {
            let mut session = Some(session);
            while let Some(job) = rx.recv().await {
                let mut s = session.take().expect("session present between jobs");
                match tokio::task::spawn_blocking(move || {
                    job(&mut s);
                    s
                })
                .await
                {
                    Ok(s) => session = Some(s),
                    Err(e) => {
                        tracing::error!("session job panicked: {e}");
                        return;
                    }
                }
            }
        });
        Self { id, jobs }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Queues `f` behind every job already sent and waits for its result.
    pub async fn run<R: Send + 'static>(
        &self,
        f: impl FnOnce(&mut Session) -> R + Send + 'static,
    ) -> Result<R, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.jobs
            .send(Box::new(move |s| {
                let _ = tx.send(f(s));
            }))
            .map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)
    }
}

/// Options for a new session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Random when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub num_turns: Option<i64>,
    #[serde(default)]
    pub years_per_turn: Option<i64>,
    #[serde(default)]
    pub start_year: Option<i64>,
}

pub struct Hub {
    content: ContentDir,
    data_dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, SessionHandle>>,
}

impl Hub {
    /// A hub with no persistence.
    pub fn in_memory(content: ContentDir) -> Arc<Self> {
        Arc::new(Self {
            content,
            data_dir: None,
            sessions: RwLock::new(BTreeMap::new()),
        })
    }

    /// Opens `data_dir` and restores every session found in it. Sessions that
    /// fail to restore are reported and skipped.
    pub async fn open(
        content: ContentDir,
        data_dir: PathBuf,
    ) -> std::io::Result<(Arc<Self>, Vec<(String, SessionError)>)> {
        std::fs::create_dir_all(&data_dir)?;
        let mut sessions = BTreeMap::new();
        let mut failed = Vec::new();
        for entry in std::fs::read_dir(&data_dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            let restored = SessionStore::new(entry.path())
                .map_err(SessionError::from)
                .and_then(Session::restore);
            match restored {
                Ok(s) => {
                    sessions.insert(name, SessionHandle::spawn(s));
                }
                Err(e) => {
                    tracing::warn!("session {name} not restored: {e}");
                    failed.push((name, e));
                }
            }
        }
        let hub = Arc::new(Self {
            content,
            data_dir: Some(data_dir),
            sessions: RwLock::new(sessions),
        });
        Ok((hub, failed))
    }

    pub fn content(&self) -> &ContentDir {
        &self.content
    }

    pub async fn create(
        &self,
        scenario_id: &str,
        config: SessionConfig,
    ) -> Result<Created, SessionError> {
        let mut scenario = self.content.load(scenario_id).map_err(|e| match e {
            LoadError::UnknownScenario(id) => SessionError::UnknownScenario(id),
            LoadError::InvalidScenario(v) => SessionError::InvalidScenario(v),
            other => SessionError::BadRequest(other.to_string()),
        })?;
        if let Some(n) = config.num_turns {
            scenario.num_turns = n;
        }
        if let Some(y) = config.years_per_turn {
            scenario.years_per_turn = y;
        }
        if let Some(y) = config.start_year {
            scenario.start_year = y;
        }
        let seed = config.seed.unwrap_or_else(|| rand::rng().random());
        let mut sessions = self.sessions.write().await;
        let id = loop {
            let id = hex::encode(rand::rng().random::<[u8; 6]>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let store = match &self.data_dir {
            Some(dir) => Some(SessionStore::new(dir.join(&id))?),
            None => None,
        };
        let (session, created) =
            match Session::create(id.clone(), scenario_id.to_owned(), scenario, seed, store) {
                Ok(x) => x,
                Err(e) => {
                    if let Some(dir) = &self.data_dir {
                        let _ = std::fs::remove_dir_all(dir.join(&id));
                    }
                    return Err(e);
                }
            };
        sessions.insert(id, SessionHandle::spawn(session));
        Ok(created)
    }

    pub async fn get(&self, id: &str) -> Result<SessionHandle, SessionError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or(SessionError::UnknownSession)
    }

    pub async fn list(&self) -> Vec<SessionSummary> {
        let handles: Vec<SessionHandle> = self.sessions.read().await.values().cloned().collect();
        let mut out = Vec::new();
        for h in handles {
            if let Ok(s) = h.run(|s| s.summary()).await {
                out.push(s);
            }
        }
        out
    }

    /// Writes every session's full log. Called on graceful shutdown.
    pub async fn persist_all(&self) -> Vec<(String, SessionError)> {
        let handles: Vec<SessionHandle> = self.sessions.read().await.values().cloned().collect();
        let mut failed = Vec::new();
        for h in handles {
            match h.run(|s| s.persist()).await {
                Ok(Ok(_)) => {}
                Ok(Err(e)) | Err(e) => failed.push((h.id().to_owned(), e)),
            }
        }
        failed
    }
}
