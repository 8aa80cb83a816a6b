//! One live game and its lobby. A session is only ever touched from its own
//! command queue (see [`crate::hub`]), so nothing here locks.

use std::collections::BTreeMap;

use futuresim_core::engine::{DebriefReport, FilteredView, PendingOrders};
use futuresim_core::{
    new_game, Caller, GameError, GameEvent, GameState, OrderRef, Phase, PlayerId, RoleId,
    Scenario, WorldEventSpec, WorldState,
};
use futuresim_core::validate::Violation;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::mpsc::UnboundedSender;

use crate::protocol::{Command, Frame, FrameKind, Nack, ServerHello, SessionStatus, PROTOCOL_VERSION};
use crate::store::{JournalHead, SessionStore, StoreError};

const JOIN_CODE_ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";
const JOIN_CODE_LEN: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("scenario failed validation with {} violation(s)", .0.len())]
    InvalidScenario(Vec<Violation>),
    #[error("unknown session")]
    UnknownSession,
    #[error("unknown join code")]
    UnknownCode,
    #[error("join code already claimed")]
    CodeClaimed,
    #[error("session already running")]
    SessionRunning,
    #[error("session is not running")]
    SessionNotRunning,
    #[error("unknown token")]
    UnknownToken,
    #[error("the facilitator holds no role")]
    NoRole,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("storage error: {0}")]
    Io(String),
    #[error("session closed")]
    Closed,
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownScenario(_) => "UnknownScenario",
            SessionError::InvalidScenario(_) => "InvalidScenario",
            SessionError::UnknownSession => "UnknownSession",
            SessionError::UnknownCode => "UnknownCode",
            SessionError::CodeClaimed => "CodeClaimed",
            SessionError::SessionRunning => "SessionRunning",
            SessionError::SessionNotRunning => "SessionNotRunning",
            SessionError::UnknownToken => "UnknownToken",
            SessionError::NoRole => "NoRole",
            SessionError::BadRequest(_) => "BadRequest",
            SessionError::Game(e) => e.code(),
            SessionError::Io(_) => "StorageError",
            SessionError::Closed => "SessionClosed",
        }
    }

    pub fn nack(&self) -> Nack {
        Nack {
            error: self.code().to_owned(),
            message: self.to_string(),
        }
    }
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Io(e.to_string())
    }
}

impl From<StoreError> for SessionError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(e) => e.into(),
            StoreError::Game(e) => e.into(),
        }
    }
}

/// Who is behind a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Principal {
    Facilitator,
    Player(RoleId),
}

impl Principal {
    pub fn label(&self) -> String {
        match self {
            Principal::Facilitator => "facilitator".to_owned(),
            Principal::Player(r) => r.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seat {
    pub join_code: String,
    pub player: Option<PlayerId>,
    /// SHA-256 of the player token; tokens themselves are never stored.
    pub token_hash: Option<String>,
}

/// The persisted part of a session besides its event journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub scenario_id: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub status: SessionStatus,
    pub facilitator_hash: String,
    pub seats: BTreeMap<RoleId, Seat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub facilitator_token: String,
    pub join_codes: BTreeMap<RoleId, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joined {
    pub player_token: String,
    pub role: RoleId,
    pub title: String,
    pub organization: String,
    pub briefing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobbySeat {
    pub role: RoleId,
    pub title: String,
    pub organization: String,
    pub claimed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lobby {
    pub session_id: String,
    pub scenario_id: String,
    pub status: SessionStatus,
    pub seats: Vec<LobbySeat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub scenario_id: String,
    pub status: SessionStatus,
    pub open_roles: Vec<RoleId>,
    pub last_seq: u64,
}

/// The facilitator's unredacted view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitatorView {
    pub phase: Phase,
    pub world: WorldState,
    pub pending_orders: BTreeMap<RoleId, PendingOrders>,
    pub unruled_free_text: Vec<OrderRef>,
    pub queued_events: Vec<WorldEventSpec>,
    pub events: Vec<GameEvent>,
}

struct Subscriber {
    id: u64,
    principal: Principal,
    cursor: u64,
    tx: UnboundedSender<Frame>,
}

pub struct Session {
    meta: SessionMeta,
    game: Option<GameState>,
    store: Option<SessionStore>,
    journaled: u64,
    subscribers: Vec<Subscriber>,
    next_subscriber: u64,
}

pub fn random_token() -> String {
    hex::encode(rand::rng().random::<[u8; 16]>())
}

fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn join_code(rng: &mut impl Rng) -> String {
    (0..JOIN_CODE_LEN)
        .map(|_| char::from(*JOIN_CODE_ALPHABET.choose(rng).expect("non-empty alphabet")))
        .collect()
}

fn seats_for(scenario: &Scenario) -> BTreeMap<RoleId, Seat> {
    let mut rng = rand::rng();
    let mut seats = BTreeMap::new();
    let mut used = std::collections::BTreeSet::new();
    for role in &scenario.roles {
        let code = loop {
            let c = join_code(&mut rng);
            if used.insert(c.clone()) {
                break c;
            }
        };
        seats.insert(
            role.id.clone(),
            Seat {
                join_code: code,
                player: None,
                token_hash: None,
            },
        );
    }
    seats
}

impl Session {
    /// A new lobby with a fresh join code per role.
    pub fn create(
        session_id: String,
        scenario_id: String,
        scenario: Scenario,
        seed: u64,
        store: Option<SessionStore>,
    ) -> Result<(Self, Created), SessionError> {
        let violations = futuresim_core::validate::validate_scenario(&scenario);
        if !violations.is_empty() {
            return Err(SessionError::InvalidScenario(violations));
        }
        let facilitator_token = random_token();
        let seats = seats_for(&scenario);
        let join_codes = seats
            .iter()
            .map(|(r, s)| (r.clone(), s.join_code.clone()))
            .collect();
        let meta = SessionMeta {
            session_id: session_id.clone(),
            scenario_id,
            scenario,
            seed,
            status: SessionStatus::Lobby,
            facilitator_hash: hash_token(&facilitator_token),
            seats,
        };
        if let Some(store) = &store {
            store.write_meta(&meta)?;
        }
        let session = Self {
            meta,
            game: None,
            store,
            journaled: 0,
            subscribers: Vec::new(),
            next_subscriber: 0,
        };
        Ok((
            session,
            Created {
                session_id,
                facilitator_token,
                join_codes,
            },
        ))
    }

    /// Reopens a persisted session. A finished game comes back read-only.
    pub fn restore(store: SessionStore) -> Result<Self, SessionError> {
        let mut meta = store.read_meta()?;
        let game = store.load_game()?;
        if let Some(g) = &game {
            meta.status = if g.phase() == Phase::Finished {
                SessionStatus::Finished
            } else {
                SessionStatus::Running
            };
        }
        let journaled = game.as_ref().map_or(0, GameState::last_seq);
        Ok(Self {
            meta,
            game,
            store: Some(store),
            journaled,
            subscribers: Vec::new(),
            next_subscriber: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.meta.session_id
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn status(&self) -> SessionStatus {
        self.meta.status
    }

    pub fn game(&self) -> Option<&GameState> {
        self.game.as_ref()
    }

    pub fn last_seq(&self) -> u64 {
        self.game.as_ref().map_or(0, GameState::last_seq)
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.meta.session_id.clone(),
            scenario_id: self.meta.scenario_id.clone(),
            status: self.meta.status,
            open_roles: self
                .meta
                .seats
                .iter()
                .filter(|(_, s)| s.player.is_none())
                .map(|(r, _)| r.clone())
                .collect(),
            last_seq: self.last_seq(),
        }
    }

    pub fn lobby(&self) -> Lobby {
        Lobby {
            session_id: self.meta.session_id.clone(),
            scenario_id: self.meta.scenario_id.clone(),
            status: self.meta.status,
            seats: self
                .meta
                .scenario
                .roles
                .iter()
                .map(|r| LobbySeat {
                    role: r.id.clone(),
                    title: r.title.clone(),
                    organization: r.organization.to_string(),
                    claimed: self.meta.seats[&r.id].player.is_some(),
                })
                .collect(),
        }
    }

    pub fn join(&mut self, code: &str) -> Result<Joined, SessionError> {
        if self.meta.status != SessionStatus::Lobby {
            return Err(SessionError::SessionRunning);
        }
        let (role, seat) = self
            .meta
            .seats
            .iter_mut()
            .find(|(_, s)| s.join_code == code)
            .ok_or(SessionError::UnknownCode)?;
        if seat.player.is_some() {
            return Err(SessionError::CodeClaimed);
        }
        let token = random_token();
        seat.player = Some(PlayerId::new(format!("player-{}", &hash_token(&token)[..12])));
        seat.token_hash = Some(hash_token(&token));
        let role = role.clone();
        self.save_meta()?;
        self.broadcast_lobby();
        let sheet = self.meta.scenario.role(&role).expect("seats mirror roles");
        Ok(Joined {
            player_token: token,
            title: sheet.title.clone(),
            organization: sheet.organization.to_string(),
            briefing: sheet.briefing.clone(),
            role,
        })
    }

    pub fn authenticate(&self, token: &str) -> Result<Principal, SessionError> {
        let h = hash_token(token);
        if h == self.meta.facilitator_hash {
            return Ok(Principal::Facilitator);
        }
        self.meta
            .seats
            .iter()
            .find(|(_, s)| s.token_hash.as_deref() == Some(h.as_str()))
            .map(|(r, _)| Principal::Player(r.clone()))
            .ok_or(SessionError::UnknownToken)
    }

    fn save_meta(&self) -> Result<(), SessionError> {
        if let Some(store) = &self.store {
            store.write_meta(&self.meta)?;
        }
        Ok(())
    }

    /// Makes every event up to now durable.
    fn journal(&mut self) -> Result<(), SessionError> {
        let Some(game) = &self.game else {
            return Ok(());
        };
        if let Some(store) = &self.store {
            let fresh: Vec<GameEvent> = game
                .events()
                .iter()
                .filter(|e| e.seq > self.journaled)
                .cloned()
                .collect();
            let head = JournalHead {
                seq: game.last_seq(),
                digest: game.digest(),
            };
            store.append(&fresh, &head)?;
        }
        self.journaled = game.last_seq();
        Ok(())
    }

    /// Writes the full log with its digest.
    pub fn persist(&mut self) -> Result<Value, SessionError> {
        self.journal()?;
        self.save_meta()?;
        match (&self.game, &self.store) {
            (Some(g), Some(store)) => {
                store.write_log(g)?;
                Ok(json!({ "last_seq": g.last_seq(), "digest": g.digest() }))
            }
            (Some(g), None) => Ok(json!({ "last_seq": g.last_seq(), "digest": g.digest() })),
            (None, _) => Ok(json!({ "last_seq": 0 })),
        }
    }

    /// Runs one command through the engine. On success the resulting events
    /// are on disk before this returns, then pushed to subscribers.
    pub fn command(&mut self, who: &Principal, cmd: Command) -> Result<Value, SessionError> {
        if cmd.facilitator_only() && who != &Principal::Facilitator {
            return Err(GameError::NotFacilitator.into());
        }
        let result = self.execute(who, cmd);
        // Even a failed command may have journaled nothing new; only push
        // what is durable.
        let journaled = self.journal();
        self.fan_out();
        let value = result?;
        journaled?;
        Ok(value)
    }

    fn execute(&mut self, who: &Principal, cmd: Command) -> Result<Value, SessionError> {
        match cmd {
            Command::Persist => return self.persist(),
            Command::Start => return self.start(),
            _ => {}
        }
        if self.meta.status != SessionStatus::Running {
            return Err(SessionError::SessionNotRunning);
        }
        let game = self.game.as_mut().expect("running sessions have a game");
        let role = || match who {
            Principal::Player(r) => Ok(r.clone()),
            Principal::Facilitator => Err(SessionError::NoRole),
        };
        match cmd {
            Command::SendMessage { to, text } => {
                let seq = game.submit_message(&role()?, &to, &text)?;
                Ok(json!({ "seq": seq }))
            }
            Command::SubmitOrders { orders } => {
                let seq = game.submit_orders(&role()?, orders)?;
                Ok(json!({ "seq": seq }))
            }
            Command::AdvancePhase => {
                let report = game.advance_phase()?;
                Ok(json!({ "phase": game.phase(), "turn": game.world().turn, "report": report }))
            }
            Command::Rule { order, ruling } => {
                let seq = game.facilitator_rule(&Caller::Facilitator, &order, ruling)?;
                Ok(json!({ "seq": seq }))
            }
            Command::InjectEvent { event } => {
                let seq = game.inject_world_event(&Caller::Facilitator, event)?;
                Ok(json!({ "seq": seq }))
            }
            Command::Debrief => {
                let report = game.debrief()?;
                self.meta.status = SessionStatus::Finished;
                self.persist()?;
                self.broadcast_lobby();
                Ok(serde_json::to_value(report).expect("report serializes"))
            }
            Command::Persist | Command::Start => unreachable!("handled above"),
        }
    }

    /// Seats every claimed role and starts the game. Unclaimed roles are held
    /// by a vacant placeholder and simply never act.
    fn start(&mut self) -> Result<Value, SessionError> {
        if self.meta.status != SessionStatus::Lobby {
            return Err(SessionError::SessionRunning);
        }
        let seats: Vec<(PlayerId, RoleId)> = self
            .meta
            .seats
            .iter()
            .map(|(r, s)| {
                let p = s
                    .player
                    .clone()
                    .unwrap_or_else(|| PlayerId::new(format!("vacant:{r}")));
                (p, r.clone())
            })
            .collect();
        let game = new_game(self.meta.scenario.clone(), self.meta.seed, &seats)?;
        self.game = Some(game);
        self.meta.status = SessionStatus::Running;
        self.save_meta()?;
        self.broadcast_lobby();
        Ok(json!({ "status": self.meta.status, "phase": Phase::Negotiation }))
    }

    pub fn player_view(&self, role: &RoleId, since: u64) -> Result<FilteredView, SessionError> {
        let game = self.game.as_ref().ok_or(SessionError::SessionNotRunning)?;
        Ok(game.player_view_since(role, since)?)
    }

    pub fn facilitator_view(&self, since: u64) -> Result<FacilitatorView, SessionError> {
        let g = self.game.as_ref().ok_or(SessionError::SessionNotRunning)?;
        Ok(FacilitatorView {
            phase: g.phase(),
            world: g.world().clone(),
            pending_orders: g.pending_orders().clone(),
            unruled_free_text: g.unruled_free_text(),
            queued_events: g.queued_events().to_vec(),
            events: g.facilitator_events_since(since),
        })
    }

    /// Current view of `who`, with events after `since`.
    pub fn view(&self, who: &Principal, since: u64) -> Result<Value, SessionError> {
        let v = match who {
            Principal::Facilitator => serde_json::to_value(self.facilitator_view(since)?),
            Principal::Player(r) => serde_json::to_value(self.player_view(r, since)?),
        };
        Ok(v.expect("views serialize"))
    }

    /// The full log. Players only get it once the game is over.
    pub fn log_text(&self, who: &Principal) -> Result<String, SessionError> {
        let game = self.game.as_ref().ok_or(SessionError::SessionNotRunning)?;
        if who != &Principal::Facilitator && self.meta.status != SessionStatus::Finished {
            return Err(GameError::NotFacilitator.into());
        }
        Ok(game.to_jsonl())
    }

    pub fn debrief_report(&mut self) -> Result<DebriefReport, SessionError> {
        if self.meta.status != SessionStatus::Finished {
            return Err(GameError::WrongPhase {
                phase: self.game.as_ref().map_or(Phase::Negotiation, GameState::phase),
            }
            .into());
        }
        let game = self.game.as_mut().expect("finished sessions have a game");
        Ok(game.debrief()?)
    }

    fn hello(&self, who: &Principal) -> Frame {
        Frame::new(
            self.last_seq(),
            FrameKind::Hello,
            ServerHello {
                protocol: PROTOCOL_VERSION,
                session_id: self.meta.session_id.clone(),
                principal: who.label(),
                status: self.meta.status,
                last_seq: self.last_seq(),
            },
        )
    }

    /// Registers a connection. It immediately receives `hello`, the lobby,
    /// every visible event after `since` and its current view.
    pub fn subscribe(&mut self, who: Principal, since: u64, tx: UnboundedSender<Frame>) -> u64 {
        let id = self.next_subscriber;
        self.next_subscriber += 1;
        let _ = tx.send(self.hello(&who));
        let _ = tx.send(Frame::new(self.last_seq(), FrameKind::Lobby, self.lobby()));
        let mut sub = Subscriber {
            id,
            principal: who,
            cursor: since,
            tx,
        };
        self.push_to(&mut sub, true);
        self.subscribers.push(sub);
        id
    }

    pub fn unsubscribe(&mut self, id: u64) {
        self.subscribers.retain(|s| s.id != id);
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    /// Sends `sub` whatever it has not seen yet, followed by its view.
    fn push_to(&self, sub: &mut Subscriber, always_view: bool) {
        let Some(game) = &self.game else {
            return;
        };
        let (events, view) = match &sub.principal {
            Principal::Facilitator => {
                let mut v = self.facilitator_view(sub.cursor).expect("game exists");
                let events = std::mem::take(&mut v.events);
                (events, serde_json::to_value(v))
            }
            Principal::Player(role) => {
                let mut v = game
                    .player_view_since(role, sub.cursor)
                    .expect("subscribers hold seated roles");
                let events = std::mem::take(&mut v.events);
                (events, serde_json::to_value(v))
            }
        };
        // Only durable events leave the server.
        let events: Vec<&GameEvent> = events.iter().filter(|e| e.seq <= self.journaled).collect();
        for e in &events {
            let _ = sub.tx.send(Frame::event(e));
        }
        if always_view || !events.is_empty() {
            let view = view.expect("views serialize");
            let _ = sub.tx.send(Frame {
                seq: self.journaled,
                kind: FrameKind::View,
                payload: view,
            });
        }
        sub.cursor = self.journaled.max(sub.cursor);
    }

    fn fan_out(&mut self) {
        let mut subs = std::mem::take(&mut self.subscribers);
        subs.retain(|s| !s.tx.is_closed());
        for sub in &mut subs {
            if self.journaled > sub.cursor {
                self.push_to(sub, false);
            }
        }
        self.subscribers = subs;
    }

    fn broadcast_lobby(&mut self) {
        let frame = Frame::new(self.last_seq(), FrameKind::Lobby, self.lobby());
        self.subscribers.retain(|s| s.tx.send(frame.clone()).is_ok());
    }
}

#[cfg(test)]
mod tests;
