//! On-disk layout of one session directory:
//!
//! - `session.json`: lobby metadata, rewritten atomically on change
//! - `journal.jsonl`: canonical event lines, appended and synced before a
//!   command is acknowledged
//! - `journal.head`: `{"seq", "digest"}` of the state after the last
//!   acknowledged command
//! - `log.jsonl`: the full log with digest line, written on persist

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use futuresim_core::engine::{event_line, replay, replay_journal, replay_jsonl};
use futuresim_core::{GameError, GameEvent, GameState};
use serde::{Deserialize, Serialize};

use crate::session::SessionMeta;

pub const META_FILE: &str = "session.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const HEAD_FILE: &str = "journal.head";
pub const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalHead {
    pub seq: u64,
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn corrupt(msg: impl Into<String>) -> GameError {
    GameError::CorruptLog(msg.into())
}

/// Write-then-rename so readers never see a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn read_optional(path: &Path) -> io::Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write_meta(&self, meta: &SessionMeta) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(meta).expect("metadata serializes");
        write_atomic(&self.path(META_FILE), &json)
    }

    pub fn read_meta(&self) -> io::Result<SessionMeta> {
        let bytes = fs::read(self.path(META_FILE))?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Appends events and records the new head. Returns once both are on disk.
    pub fn append(&self, events: &[GameEvent], head: &JournalHead) -> io::Result<()> {
        if !events.is_empty() {
            let mut text = String::new();
            for e in events {
                text.push_str(&event_line(e));
                text.push('\n');
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.path(JOURNAL_FILE))?;
            f.write_all(text.as_bytes())?;
            f.sync_data()?;
        }
        let json = serde_json::to_vec(head).expect("head serializes");
        write_atomic(&self.path(HEAD_FILE), &json)
    }

    /// Replaces the journal with exactly `events`, e.g. after dropping a torn
    /// tail during restore.
    pub fn rewrite_journal(&self, events: &[GameEvent], head: &JournalHead) -> io::Result<()> {
        let mut text = String::new();
        for e in events {
            text.push_str(&event_line(e));
            text.push('\n');
        }
        write_atomic(&self.path(JOURNAL_FILE), text.as_bytes())?;
        write_atomic(&self.path(HEAD_FILE), &serde_json::to_vec(head).expect("head serializes"))
    }

    pub fn write_log(&self, game: &GameState) -> io::Result<()> {
        write_atomic(&self.path(LOG_FILE), game.to_jsonl().as_bytes())
    }

    /// Rebuilds the game from the journal, or `None` if it never started.
    ///
    /// Everything up to the recorded head must replay to the recorded digest.
    /// Events after the head belong to a command that was never acknowledged
    /// and are kept. A persisted full log, if present, must verify and be a
    /// prefix of the journal.
    pub fn load_game(&self) -> Result<Option<GameState>, StoreError> {
        let Some(text) = read_optional(&self.path(JOURNAL_FILE))? else {
            return Ok(None);
        };
        let game = replay_journal(&text)?;
        let head: JournalHead = match read_optional(&self.path(HEAD_FILE))? {
            Some(h) => serde_json::from_str(&h).map_err(|e| corrupt(format!("journal head: {e}")))?,
            None => return Err(corrupt("journal without head").into()),
        };
        let acked = game
            .events()
            .iter()
            .position(|e| e.seq == head.seq)
            .ok_or_else(|| corrupt(format!("journal is missing acknowledged event {}", head.seq)))?;
        if replay(&game.events()[..=acked])?.digest() != head.digest {
            return Err(corrupt("journal does not match its recorded digest").into());
        }
        if let Some(log) = read_optional(&self.path(LOG_FILE))? {
            let persisted = replay_jsonl(&log)?;
            let n = persisted.events().len();
            if n > game.events().len() || persisted.events() != &game.events()[..n] {
                return Err(corrupt("persisted log disagrees with the journal").into());
            }
        }
        if !text.ends_with('\n') {
            let head = JournalHead {
                seq: game.last_seq(),
                digest: game.digest(),
            };
            self.rewrite_journal(game.events(), &head)?;
        }
        Ok(Some(game))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Game(#[from] GameError),
}
