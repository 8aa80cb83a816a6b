use std::fs;

use futuresim_core::content::default_scenario;
use futuresim_core::{Action, EventPayload, Order, OrgId, PhaseTag, Viewer};
use tokio::sync::mpsc;

use super::*;
use crate::store::{HEAD_FILE, JOURNAL_FILE, LOG_FILE};

fn lobby_session(store: Option<SessionStore>) -> (Session, Created) {
    Session::create("s1".into(), "default".into(), default_scenario(), 42, store).unwrap()
}

fn r(id: &str) -> RoleId {
    RoleId::new(id)
}

/// A running session with two seated players.
fn running(store: Option<SessionStore>) -> (Session, Created, String, String) {
    let (mut s, c) = lobby_session(store);
    let us = s.join(&c.join_codes[&r("us_president")]).unwrap().player_token;
    let ceo = s.join(&c.join_codes[&r("alphabet_ceo")]).unwrap().player_token;
    s.command(&Principal::Facilitator, Command::Start).unwrap();
    (s, c, us, ceo)
}

fn fac() -> Principal {
    Principal::Facilitator
}

fn player(role: &str) -> Principal {
    Principal::Player(r(role))
}

#[test]
fn default_scenario_opens_eight_seats() {
    let (s, c) = lobby_session(None);
    assert_eq!(c.join_codes.len(), 8);
    assert_eq!(s.status(), SessionStatus::Lobby);
    assert_eq!(s.lobby().seats.len(), 8);
    assert!(s.lobby().seats.iter().all(|seat| !seat.claimed));
    let codes: std::collections::BTreeSet<_> = c.join_codes.values().collect();
    assert_eq!(codes.len(), 8);
    assert_eq!(c.facilitator_token.len(), 32);
}

#[test]
fn out_of_bounds_scenario_is_refused() {
    let mut sc = default_scenario();
    sc.num_turns = 9;
    assert!(matches!(
        Session::create("s".into(), "default".into(), sc, 1, None),
        Err(SessionError::InvalidScenario(_))
    ));
}

#[test]
fn joining_claims_a_role_once() {
    let (mut s, c) = lobby_session(None);
    let code = &c.join_codes[&r("prc_president")];
    let j = s.join(code).unwrap();
    assert_eq!(j.role, r("prc_president"));
    assert!(!j.briefing.is_empty());
    assert!(matches!(s.join(code), Err(SessionError::CodeClaimed)));
    assert!(matches!(s.join("NOPE00"), Err(SessionError::UnknownCode)));
    assert_eq!(s.authenticate(&j.player_token).unwrap(), player("prc_president"));
    assert_eq!(s.authenticate(&c.facilitator_token).unwrap(), fac());
    assert!(matches!(s.authenticate("guess"), Err(SessionError::UnknownToken)));
    s.command(&fac(), Command::Start).unwrap();
    assert!(matches!(
        s.join(&c.join_codes[&r("us_president")]),
        Err(SessionError::SessionRunning)
    ));
}

#[test]
fn commands_are_gated_by_status_and_principal() {
    let (mut s, _) = lobby_session(None);
    let msg = Command::SendMessage {
        to: vec![],
        text: "hi".into(),
    };
    assert!(matches!(
        s.command(&player("us_president"), msg.clone()),
        Err(SessionError::SessionNotRunning)
    ));
    assert!(matches!(
        s.command(&player("us_president"), Command::Start),
        Err(SessionError::Game(GameError::NotFacilitator))
    ));
    s.command(&fac(), Command::Start).unwrap();
    assert!(matches!(s.command(&fac(), Command::Start), Err(SessionError::SessionRunning)));
    assert!(matches!(s.command(&fac(), msg.clone()), Err(SessionError::NoRole)));
    s.command(&player("us_president"), msg).unwrap();
    // Orders during negotiation: the engine's error comes back unchanged.
    let order = Order::new(
        "us_president",
        PhaseTag::Private,
        Action::SafetyInvestment { talent: 1 },
    );
    let err = s
        .command(&player("us_president"), Command::SubmitOrders { orders: vec![order] })
        .unwrap_err();
    assert_eq!(err.code(), "WrongPhase");
}

#[test]
fn persist_and_restore_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path().join("s1")).unwrap();
    let (mut s, c, us, _) = running(Some(store));
    s.command(&player("us_president"), Command::SendMessage { to: vec![], text: "pact?".into() })
        .unwrap();
    s.command(&fac(), Command::AdvancePhase).unwrap();
    s.command(&fac(), Command::Persist).unwrap();
    let digest = s.game().unwrap().digest();

    let back = Session::restore(SessionStore::new(dir.path().join("s1")).unwrap()).unwrap();
    assert_eq!(back.game().unwrap().digest(), digest);
    assert_eq!(back.status(), SessionStatus::Running);
    assert_eq!(back.authenticate(&us).unwrap(), player("us_president"));
    assert_eq!(back.authenticate(&c.facilitator_token).unwrap(), fac());
    assert!(back.meta().seats[&r("tencent_ceo")].player.is_none());
}

#[test]
fn acked_commands_survive_a_crash_without_persist() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1");
    let (mut s, _, _, _) = running(Some(SessionStore::new(&path).unwrap()));
    let ack = s
        .command(&player("alphabet_ceo"), Command::SendMessage { to: vec![], text: "x".into() })
        .unwrap();
    let seq = ack["seq"].as_u64().unwrap();
    let digest = s.game().unwrap().digest();
    drop(s);
    assert!(!path.join(LOG_FILE).exists());
    let back = Session::restore(SessionStore::new(&path).unwrap()).unwrap();
    assert_eq!(back.last_seq(), seq);
    assert_eq!(back.game().unwrap().digest(), digest);
}

#[test]
fn torn_journal_tail_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1");
    let (mut s, _, _, _) = running(Some(SessionStore::new(&path).unwrap()));
    s.command(&fac(), Command::AdvancePhase).unwrap();
    let digest = s.game().unwrap().digest();
    drop(s);
    let mut journal = fs::read_to_string(path.join(JOURNAL_FILE)).unwrap();
    journal.push_str(r#"{"actor":"facilitator","kind":"Bullet"#);
    fs::write(path.join(JOURNAL_FILE), journal).unwrap();
    let back = Session::restore(SessionStore::new(&path).unwrap()).unwrap();
    assert_eq!(back.game().unwrap().digest(), digest);
    // The journal was repaired, so later appends stay parseable.
    assert!(fs::read_to_string(path.join(JOURNAL_FILE)).unwrap().ends_with('\n'));
}

#[test]
fn tampering_is_detected_on_restore() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1");
    let (mut s, _, _, _) = running(Some(SessionStore::new(&path).unwrap()));
    s.command(&player("us_president"), Command::SendMessage { to: vec![], text: "fair".into() })
        .unwrap();
    s.command(&fac(), Command::Persist).unwrap();
    drop(s);

    let journal = fs::read_to_string(path.join(JOURNAL_FILE)).unwrap();
    fs::write(path.join(JOURNAL_FILE), journal.replace("fair", "foul")).unwrap();
    assert!(matches!(
        Session::restore(SessionStore::new(&path).unwrap()),
        Err(SessionError::Game(GameError::CorruptLog(_)))
    ));
    fs::write(path.join(JOURNAL_FILE), &journal).unwrap();
    assert!(Session::restore(SessionStore::new(&path).unwrap()).is_ok());

    let log = fs::read_to_string(path.join(LOG_FILE)).unwrap();
    fs::write(path.join(LOG_FILE), log.replace("fair", "foul")).unwrap();
    assert!(matches!(
        Session::restore(SessionStore::new(&path).unwrap()),
        Err(SessionError::Game(GameError::CorruptLog(_)))
    ));
    fs::write(path.join(LOG_FILE), &log).unwrap();

    fs::write(path.join(HEAD_FILE), r#"{"seq":2,"digest":"00"}"#).unwrap();
    assert!(Session::restore(SessionStore::new(&path).unwrap()).is_err());
}

fn finish(s: &mut Session) {
    while s.game().unwrap().phase() != Phase::Debrief {
        s.command(&fac(), Command::AdvancePhase).unwrap();
    }
    s.command(&fac(), Command::Debrief).unwrap();
}

#[test]
fn finished_game_restores_read_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1");
    let (mut s, _, _, _) = running(Some(SessionStore::new(&path).unwrap()));
    finish(&mut s);
    assert_eq!(s.status(), SessionStatus::Finished);
    let report = s.debrief_report().unwrap();
    drop(s);
    let mut back = Session::restore(SessionStore::new(&path).unwrap()).unwrap();
    assert_eq!(back.status(), SessionStatus::Finished);
    assert_eq!(back.debrief_report().unwrap(), report);
    assert!(matches!(
        back.command(&fac(), Command::AdvancePhase),
        Err(SessionError::SessionNotRunning)
    ));
    assert!(back.log_text(&player("us_president")).is_ok());
}

#[test]
fn players_get_the_log_only_after_the_game() {
    let (mut s, _, _, _) = running(None);
    assert!(s.log_text(&fac()).is_ok());
    assert!(matches!(
        s.log_text(&player("us_president")),
        Err(SessionError::Game(GameError::NotFacilitator))
    ));
    assert!(s.debrief_report().is_err());
    finish(&mut s);
    assert!(s.log_text(&player("us_president")).is_ok());
}

fn drain(rx: &mut mpsc::UnboundedReceiver<Frame>) -> Vec<Frame> {
    let mut out = Vec::new();
    while let Ok(f) = rx.try_recv() {
        out.push(f);
    }
    out
}

#[test]
fn subscribers_receive_only_their_view() {
    let (mut s, _, _, _) = running(None);
    let (tx_us, mut rx_us) = mpsc::unbounded_channel();
    let (tx_ceo, mut rx_ceo) = mpsc::unbounded_channel();
    let (tx_f, mut rx_f) = mpsc::unbounded_channel();
    s.subscribe(player("us_president"), 0, tx_us);
    s.subscribe(player("alphabet_ceo"), 0, tx_ceo);
    s.subscribe(fac(), 0, tx_f);
    let first = drain(&mut rx_us);
    assert_eq!(first[0].kind, FrameKind::Hello);
    assert_eq!(first[1].kind, FrameKind::Lobby);
    assert_eq!(first.last().unwrap().kind, FrameKind::View);
    drain(&mut rx_ceo);
    drain(&mut rx_f);

    s.command(
        &player("us_president"),
        Command::SendMessage {
            to: vec![r("prc_president")],
            text: "secret".into(),
        },
    )
    .unwrap();
    let us = drain(&mut rx_us);
    assert_eq!(us.iter().filter(|f| f.kind == FrameKind::Event).count(), 1);
    assert!(drain(&mut rx_ceo).is_empty());
    assert_eq!(drain(&mut rx_f).iter().filter(|f| f.kind == FrameKind::Event).count(), 1);

    // Resolution: every pushed event is admitted for its recipient.
    for _ in 0..3 {
        s.command(&fac(), Command::AdvancePhase).unwrap();
    }
    let game = s.game().unwrap();
    let org = OrgId::new("alphabet");
    let role = r("alphabet_ceo");
    for f in drain(&mut rx_ceo).into_iter().filter(|f| f.kind == FrameKind::Event) {
        let e: GameEvent = serde_json::from_value(f.payload).unwrap();
        assert!(e.visibility.admits(Viewer::Role { role: &role, org: &org }));
        assert_eq!(&e, &game.events()[e.seq as usize - 1]);
    }
}

#[test]
fn resubscribing_resumes_after_since() {
    let (mut s, _, _, _) = running(None);
    s.command(&player("us_president"), Command::SendMessage { to: vec![], text: "a".into() })
        .unwrap();
    let since = s.last_seq();
    s.command(&player("us_president"), Command::SendMessage { to: vec![], text: "b".into() })
        .unwrap();
    let (tx, mut rx) = mpsc::unbounded_channel();
    s.subscribe(player("alphabet_ceo"), since, tx);
    let events: Vec<Frame> = drain(&mut rx).into_iter().filter(|f| f.kind == FrameKind::Event).collect();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].seq, since + 1);
    match serde_json::from_value::<GameEvent>(events[0].payload.clone()).unwrap().body {
        EventPayload::MessageSent { text, .. } => assert_eq!(text, "b"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn closed_subscribers_are_dropped() {
    let (mut s, _, _, _) = running(None);
    let (tx, rx) = mpsc::unbounded_channel();
    s.subscribe(player("us_president"), 0, tx);
    drop(rx);
    s.command(&fac(), Command::AdvancePhase).unwrap();
    assert_eq!(s.subscriber_count(), 0);
}
