mod common;

use std::collections::BTreeMap;

use common::{connect, hello, next_frame, send, until, Client, Server, Ws};
use futuresim_core::agents::{decide, policy_catalog};
use futuresim_core::content::default_scenario;
use futuresim_core::engine::{replay, replay_jsonl};
use futuresim_core::rng::{stream, StreamKey};
use futuresim_core::{FilteredView, GameEvent, GameState, Phase, RoleId, Viewer};
use futuresim_server::{Frame, FrameKind};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

const PER_CLIENT: u64 = 25;

async fn command(ws: &mut Ws, seq: u64, cmd: Value) -> Frame {
    send(ws, &Frame::new(seq, FrameKind::Command, cmd)).await;
    loop {
        let f = next_frame(ws).await.expect("reply before close");
        if matches!(f.kind, FrameKind::Ack | FrameKind::Nack) && f.seq == seq {
            return f;
        }
    }
}

#[tokio::test]
async fn handshake_and_version_check() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(1).await;
    let us = c.join(&s, "us_president").await;

    let mut ws = connect(&server, &s.id, &us, 0).await;
    let first = next_frame(&mut ws).await.unwrap();
    assert_eq!(first.kind, FrameKind::Hello);
    assert_eq!(first.payload["protocol"], 1);
    assert_eq!(first.payload["principal"], "us_president");
    assert_eq!(first.payload["status"], "lobby");
    assert_eq!(next_frame(&mut ws).await.unwrap().kind, FrameKind::Lobby);

    // Commands before hello are refused without closing.
    send(&mut ws, &Frame::new(4, FrameKind::Command, json!({ "type": "send_message", "text": "x" }))).await;
    let f = next_frame(&mut ws).await.unwrap();
    assert_eq!((f.kind, f.seq), (FrameKind::Error, 4));
    hello(&mut ws, 1).await;
    let f = command(&mut ws, 5, json!({ "type": "send_message", "text": "x" })).await;
    assert_eq!(f.kind, FrameKind::Nack);
    assert_eq!(f.payload["error"], "SessionNotRunning");

    // Another seat being claimed shows up as a lobby frame.
    c.join(&s, "prc_president").await;
    let f = next_frame(&mut ws).await.unwrap();
    assert_eq!(f.kind, FrameKind::Lobby);
    assert_eq!(f.payload["seats"].as_array().unwrap().iter().filter(|x| x["claimed"] == true).count(), 2);

    let mut old = connect(&server, &s.id, &us, 0).await;
    hello(&mut old, 99).await;
    let mut kinds = Vec::new();
    while let Some(f) = next_frame(&mut old).await {
        kinds.push(f.kind);
        if f.kind == FrameKind::Error {
            assert!(f.payload["message"].as_str().unwrap().contains("99"));
        }
    }
    assert_eq!(kinds.last(), Some(&FrameKind::Error), "closed after the error");

    let url = format!("{}/api/sessions/{}/ws?token=forged", server.ws_base, s.id);
    assert!(tokio_tungstenite::connect_async(url).await.is_err());
}

#[tokio::test]
async fn racing_commands_are_all_applied_in_some_order() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(2).await;
    let a = c.join(&s, "us_president").await;
    let b = c.join(&s, "prc_president").await;
    c.command(&s, &s.facilitator, json!({ "type": "start" })).await;

    let mut wa = connect(&server, &s.id, &a, 0).await;
    let mut wb = connect(&server, &s.id, &b, 0).await;
    hello(&mut wa, 1).await;
    hello(&mut wb, 1).await;
    let (sa, sb) = tokio::join!(spam(wa, "a"), spam(wb, "b"));
    let mut all: Vec<u64> = sa.iter().chain(&sb).copied().collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len() as u64, 2 * PER_CLIENT);
    assert!(sa.windows(2).all(|w| w[0] < w[1]));

    let (_, log) = c.get(&format!("/api/sessions/{}/log", s.id), Some(&s.facilitator)).await;
    let game = replay_jsonl(&log).unwrap();
    let texts: Vec<String> = game
        .events()
        .iter()
        .filter_map(|e| match &e.body {
            futuresim_core::EventPayload::MessageSent { text, .. } => Some(text.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(texts.len() as u64, 2 * PER_CLIENT);
    for i in 1..=PER_CLIENT {
        assert!(texts.contains(&format!("a{i}")) && texts.contains(&format!("b{i}")));
    }
}

async fn spam(mut ws: Ws, tag: &'static str) -> Vec<u64> {
    let mut seqs = Vec::new();
    for i in 1..=PER_CLIENT {
        let f = command(&mut ws, i, json!({ "type": "send_message", "text": format!("{tag}{i}") })).await;
        assert_eq!(f.kind, FrameKind::Ack, "{}", f.payload);
        seqs.push(f.payload["seq"].as_u64().unwrap());
    }
    seqs
}

struct Seat {
    role: RoleId,
    token: String,
    ws: Ws,
    frames: Vec<Frame>,
    next: u64,
}

impl Seat {
    async fn command(&mut self, cmd: Value) -> Frame {
        self.next += 1;
        let seq = self.next;
        send(&mut self.ws, &Frame::new(seq, FrameKind::Command, cmd)).await;
        loop {
            let f = next_frame(&mut self.ws).await.expect("open");
            let reply = matches!(f.kind, FrameKind::Ack | FrameKind::Nack) && f.seq == seq;
            if reply {
                return f;
            }
            self.frames.push(f);
        }
    }

    /// Reads until the view for `last_seq` arrives.
    async fn catch_up(&mut self, last_seq: u64) {
        let got = self.frames.iter().any(|f| f.kind == FrameKind::View && f.seq == last_seq);
        if !got {
            let more = until(&mut self.ws, FrameKind::View, last_seq).await;
            self.frames.extend(more);
        }
    }
}

/// Plays a whole game through the server with every seat connected and
/// checks that each socket carried exactly its role's share of the log.
#[tokio::test]
async fn sockets_carry_exactly_what_each_role_may_see() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(99).await;
    let scenario = default_scenario();
    let catalog = policy_catalog();
    let mut rng = stream(99, StreamKey::new(0, "test", "", ""));

    let mut seats = Vec::new();
    for role in &scenario.roles {
        let token = c.join(&s, role.id.as_str()).await;
        let mut ws = connect(&server, &s.id, &token, 0).await;
        hello(&mut ws, 1).await;
        seats.push(Seat {
            role: role.id.clone(),
            token,
            ws,
            frames: Vec::new(),
            next: 0,
        });
    }
    let mut fac = connect(&server, &s.id, &s.facilitator, 0).await;
    hello(&mut fac, 1).await;
    let policies: BTreeMap<RoleId, usize> = scenario
        .roles
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.clone(), i % catalog.len()))
        .collect();

    let (status, _) = c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    assert_eq!(status, 200);
    loop {
        let fv = c.view(&s, &s.facilitator, u64::MAX).await;
        let phase: Phase = serde_json::from_value(fv["phase"].clone()).unwrap();
        let turn = fv["world"]["turn"].as_i64().unwrap();
        match phase {
            Phase::Negotiation => {
                for _ in 0..rng.random_range(0..4) {
                    let i = rng.random_range(0..seats.len());
                    let n = rng.random_range(0..3);
                    let to: Vec<RoleId> = scenario
                        .roles
                        .choose_multiple(&mut rng, n)
                        .map(|r| r.id.clone())
                        .collect();
                    let f = seats[i]
                        .command(json!({ "type": "send_message", "to": to, "text": format!("t{turn} note {i}") }))
                        .await;
                    assert_eq!(f.kind, FrameKind::Ack, "{}", f.payload);
                }
            }
            Phase::PrivateActions | Phase::PublicActions => {
                for seat in &mut seats {
                    let view: FilteredView =
                        serde_json::from_value(c.view(&s, &seat.token, u64::MAX).await).unwrap();
                    let mut arng = stream(99, StreamKey::new(turn, "agent", seat.role.as_str(), ""));
                    let d = decide(catalog[policies[&seat.role]].as_ref(), &view, &scenario, &mut arng);
                    if d.orders.is_empty() {
                        continue;
                    }
                    let f = seat.command(json!({ "type": "submit_orders", "orders": d.orders })).await;
                    assert_eq!(f.kind, FrameKind::Ack, "{}", f.payload);
                }
            }
            Phase::Debrief => break,
            other => panic!("unexpected {other:?}"),
        }
        let (status, body) = c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
        assert_eq!(status, 200, "{body}");
    }
    let (status, _) = c.command(&s, &s.facilitator, json!({ "type": "debrief" })).await;
    assert_eq!(status, 200);

    let (_, log) = c.get(&format!("/api/sessions/{}/log", s.id), Some(&s.facilitator)).await;
    let game = replay_jsonl(&log).unwrap();
    assert_eq!(game.phase(), Phase::Finished);
    let last = game.last_seq();

    let mut prefixes: BTreeMap<u64, GameState> = BTreeMap::new();
    let mut state_at = |seq: u64| -> GameState {
        prefixes
            .entry(seq)
            .or_insert_with(|| replay(&game.events()[..seq as usize]).unwrap())
            .clone()
    };

    let mut audited = 0;
    for seat in &mut seats {
        seat.catch_up(last).await;
        let org = scenario.role(&seat.role).unwrap().organization.clone();
        let expected = game.player_view(&seat.role).unwrap().events;
        let mut received: Vec<GameEvent> = Vec::new();
        for f in &seat.frames {
            match f.kind {
                FrameKind::Event => {
                    let e: GameEvent = serde_json::from_value(f.payload.clone()).unwrap();
                    assert_eq!(f.seq, e.seq);
                    assert!(
                        e.visibility.admits(Viewer::Role { role: &seat.role, org: &org }),
                        "{} received {:?}",
                        seat.role,
                        e
                    );
                    received.push(e);
                }
                FrameKind::View => {
                    let got: FilteredView = serde_json::from_value(f.payload.clone()).unwrap();
                    let mut want = state_at(f.seq).player_view(&seat.role).unwrap();
                    want.events.clear();
                    assert_eq!(got, want, "{} view at {}", seat.role, f.seq);
                    audited += 1;
                }
                _ => {}
            }
        }
        assert_eq!(received, expected, "{} event stream", seat.role);
    }

    let frames = until(&mut fac, FrameKind::View, last).await;
    let events: Vec<GameEvent> = frames
        .iter()
        .filter(|f| f.kind == FrameKind::Event)
        .map(|f| serde_json::from_value(f.payload.clone()).unwrap())
        .collect();
    assert_eq!(events, game.events());
    assert!(audited > 50, "only {audited} views audited");
}

#[tokio::test]
async fn resolution_pushes_bulletins_and_private_reports() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(8).await;
    let ceo = c.join(&s, "alphabet_ceo").await;
    c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    let mut ws = connect(&server, &s.id, &ceo, 0).await;
    hello(&mut ws, 1).await;
    let before = loop {
        let f = next_frame(&mut ws).await.unwrap();
        if f.kind == FrameKind::View {
            break f.seq;
        }
    };

    c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
    let orders = json!({ "type": "submit_orders", "orders": [{
        "issuing_role": "alphabet_ceo",
        "phase_tag": "private",
        "action": { "kind": "SafetyInvestment", "talent": 1 }
    }]});
    let (status, body) = c.command(&s, &ceo, orders).await;
    assert_eq!(status, 200, "{body}");
    c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
    let (_, body) = c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
    assert!(!body["report"].is_null(), "third advance resolves the turn");

    let fv = c.view(&s, &s.facilitator, 0).await;
    let last = fv["events"].as_array().unwrap().last().unwrap()["seq"].as_u64().unwrap();
    let frames = until(&mut ws, FrameKind::View, last).await;
    let events: Vec<GameEvent> = frames
        .iter()
        .filter(|f| f.kind == FrameKind::Event && f.seq > before)
        .map(|f| serde_json::from_value(f.payload.clone()).unwrap())
        .collect();
    use futuresim_core::Visibility;
    let alphabet = futuresim_core::OrgId::new("alphabet");
    assert!(events.iter().any(|e| e.visibility == Visibility::Public));
    assert!(events
        .iter()
        .any(|e| e.visibility == Visibility::Org { org: alphabet.clone() }));
    assert!(events.iter().all(|e| match &e.visibility {
        Visibility::Org { org } => org == &alphabet,
        Visibility::Roles { roles } => roles.contains(&RoleId::new("alphabet_ceo")),
        Visibility::Public => true,
        Visibility::FacilitatorOnly => false,
    }));
    let view: FilteredView = serde_json::from_value(frames.last().unwrap().payload.clone()).unwrap();
    assert_eq!(view.phase, Phase::Negotiation);
    assert_eq!(view.turn, 1);
}
