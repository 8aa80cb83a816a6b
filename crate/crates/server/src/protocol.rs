//! Wire protocol.
//!
//! Every WebSocket message is one compact JSON object `{seq, kind, payload}`.
//! The server speaks first with a `hello` frame; the client must answer with
//! its own `hello` carrying the protocol version before sending commands.
//!
//! Server to client:
//! - `hello`: `{protocol, session_id, principal, status, last_seq}`
//! - `lobby`: seat table, sent on connect and whenever it changes
//! - `event`: one view-filtered [`GameEvent`]; `seq` is the event's seq.
//!   Delivery is at-least-once across reconnects; dedupe by `seq`.
//! - `view`: the recipient's current view, events omitted; sent after each
//!   batch of events
//! - `ack` / `nack`: reply to the client command with the same `seq`
//! - `error`: malformed frame or failed handshake
//!
//! Client to server: `hello`, then `command` frames whose payload is a
//! [`Command`].

use futuresim_core::{
    GameEvent, Order, OrderRef, Ruling, RoleId, WorldEventSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Hello,
    Lobby,
    Event,
    View,
    Command,
    Ack,
    Nack,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub seq: u64,
    pub kind: FrameKind,
    #[serde(default)]
    pub payload: Value,
}

impl Frame {
    pub fn new(seq: u64, kind: FrameKind, payload: impl Serialize) -> Self {
        Self {
            seq,
            kind,
            payload: serde_json::to_value(payload).expect("frame payload serializes"),
        }
    }

    pub fn event(e: &GameEvent) -> Self {
        Self::new(e.seq, FrameKind::Event, e)
    }

    /// Compact JSON; never contains a raw newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }

    pub fn decode(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientHello {
    pub protocol: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerHello {
    pub protocol: u32,
    pub session_id: String,
    /// `"facilitator"` or the player's role id.
    pub principal: String,
    pub status: SessionStatus,
    pub last_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Lobby,
    Running,
    Finished,
}

/// Everything a client can ask a session to do. Players may send messages
/// and orders; the rest is facilitator-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SendMessage {
        /// Empty for a broadcast.
        #[serde(default)]
        to: Vec<RoleId>,
        text: String,
    },
    SubmitOrders {
        orders: Vec<Order>,
    },
    Start,
    AdvancePhase,
    Rule {
        order: OrderRef,
        ruling: Ruling,
    },
    InjectEvent {
        event: WorldEventSpec,
    },
    Debrief,
    Persist,
}

impl Command {
    pub fn facilitator_only(&self) -> bool {
        !matches!(self, Command::SendMessage { .. } | Command::SubmitOrders { .. })
    }
}

/// Body of a `nack` frame and of HTTP error responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nack {
    pub error: String,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_single_line() {
        let f = Frame::new(3, FrameKind::Ack, serde_json::json!({"text": "a\nb"}));
        let s = f.encode();
        assert!(!s.contains('\n'));
        assert_eq!(Frame::decode(&s).unwrap(), f);
        assert!(s.contains(r#""kind":"ack""#));
    }

    #[test]
    fn commands_use_a_type_tag() {
        let c: Command = serde_json::from_str(r#"{"type":"advance_phase"}"#).unwrap();
        assert_eq!(c, Command::AdvancePhase);
        assert!(c.facilitator_only());
        let c: Command =
            serde_json::from_str(r#"{"type":"send_message","text":"hi"}"#).unwrap();
        assert!(!c.facilitator_only());
        assert!(serde_json::from_str::<Command>(r#"{"type":"cheat"}"#).is_err());
    }
}
