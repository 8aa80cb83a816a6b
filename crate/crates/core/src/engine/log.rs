//! Log persistence and replay.
//!
//! A persisted log is JSON Lines: one canonical (sorted-key, compact) event
//! per line, then a final `{"digest":"<sha256 hex>"}` line holding the digest
//! of the state the log folds to. Any edit to a single line either breaks
//! parsing, breaks canonical form, breaks a fold invariant or changes the
//! digest.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::GameError;
use crate::model::GameEvent;

use super::{apply::apply, GameState};

pub const DIGEST_KEY: &str = "digest";

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(out, v);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, v);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("game types serialize to JSON");
    let mut out = String::new();
    write_value(&mut out, &v);
    out
}

pub fn event_line(event: &GameEvent) -> String {
    canonical_json(event)
}

fn corrupt(msg: impl Into<String>) -> GameError {
    GameError::CorruptLog(msg.into())
}

/// Events and trailing digest read from a JSONL log.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub events: Vec<GameEvent>,
    pub digest: Option<String>,
}

fn parse_line(lineno: usize, line: &str) -> Result<Result<GameEvent, String>, GameError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| corrupt(format!("line {lineno}: not JSON: {e}")))?;
    if let Value::Object(map) = &value {
        if map.len() == 1 {
            if let Some(Value::String(d)) = map.get(DIGEST_KEY) {
                return Ok(Err(d.clone()));
            }
        }
    }
    let event: GameEvent = serde_json::from_value(value)
        .map_err(|e| corrupt(format!("line {lineno}: not an event: {e}")))?;
    if event_line(&event) != line {
        return Err(corrupt(format!("line {lineno}: not in canonical form")));
    }
    Ok(Ok(event))
}

/// Parses a JSONL log strictly: every line canonical, digest only at the end.
pub fn parse_log(text: &str) -> Result<ParsedLog, GameError> {
    let mut events = Vec::new();
    let mut digest = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            return Err(corrupt(format!("line {lineno}: empty")));
        }
        if digest.is_some() {
            return Err(corrupt(format!("line {lineno}: content after digest")));
        }
        match parse_line(lineno, line)? {
            Ok(e) => events.push(e),
            Err(d) => digest = Some(d),
        }
    }
    Ok(ParsedLog { events, digest })
}

/// Folds a log into a game state. The log must start with `GameCreated` and
/// have consecutive sequence numbers.
pub fn replay(events: &[GameEvent]) -> Result<GameState, GameError> {
    replay_prefix(events, |_| true, |_| {})
}

/// Like [`replay`], calling `observe` with the state after every event,
/// genesis included.
pub fn replay_observed(
    events: &[GameEvent],
    observe: impl FnMut(&GameState),
) -> Result<GameState, GameError> {
    replay_prefix(events, |_| true, observe)
}

/// State at the close of `turn`: events stamped with a later turn are skipped.
pub fn replay_until(events: &[GameEvent], turn: i64) -> Result<GameState, GameError> {
    replay_prefix(events, |e| e.turn <= turn, |_| {})
}

fn replay_prefix(
    events: &[GameEvent],
    mut keep: impl FnMut(&GameEvent) -> bool,
    mut observe: impl FnMut(&GameState),
) -> Result<GameState, GameError> {
    let (first, rest) = events.split_first().ok_or_else(|| corrupt("empty log"))?;
    let mut state = GameState::from_genesis(first.clone())?;
    observe(&state);
    for event in rest {
        if !keep(event) {
            break;
        }
        let expected = state.last_seq() + 1;
        if event.seq != expected {
            return Err(corrupt(format!(
                "sequence gap: expected {expected}, found {}",
                event.seq
            )));
        }
        if event.turn != state.world.turn || event.phase != state.world.phase {
            return Err(corrupt(format!(
                "event {} stamped turn {} {} but game is at turn {} {}",
                event.seq, event.turn, event.phase, state.world.turn, state.world.phase
            )));
        }
        apply(&mut state, event)?;
        state.event_log.push(event.clone());
        observe(&state);
    }
    Ok(state)
}

/// Replays a persisted JSONL log and checks its digest.
pub fn replay_jsonl(text: &str) -> Result<GameState, GameError> {
    let parsed = parse_log(text)?;
    let digest = parsed.digest.ok_or_else(|| corrupt("missing digest line"))?;
    let state = replay(&parsed.events)?;
    let actual = state.digest();
    if actual != digest {
        return Err(corrupt(format!("digest mismatch: log says {digest}, state is {actual}")));
    }
    Ok(state)
}

/// Replays a crash journal: like [`replay_jsonl`] but without a digest, and a
/// torn final line (no trailing newline) is dropped.
pub fn replay_journal(text: &str) -> Result<GameState, GameError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let parsed = parse_log(complete)?;
    let state = replay(&parsed.events)?;
    if let Some(d) = parsed.digest {
        if d != state.digest() {
            return Err(corrupt("digest mismatch"));
        }
    }
    Ok(state)
}

impl GameState {
    /// SHA-256 (hex) of the canonical serialization of the whole state,
    /// event log included.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(canonical_json(self).as_bytes()))
    }

    /// The persisted form of the log, digest line included.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.event_log {
            out.push_str(&event_line(e));
            out.push('\n');
        }
        out.push_str(&canonical_json(&serde_json::json!({ DIGEST_KEY: self.digest() })));
        out.push('\n');
        out
    }
}
