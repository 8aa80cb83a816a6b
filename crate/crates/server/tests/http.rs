mod common;

use common::{Client, Server};
use futuresim_core::engine::replay_jsonl;
use serde_json::json;

#[tokio::test]
async fn lobby_lifecycle() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);

    let (status, body) = c.get_json("/api/protocol", None).await;
    assert_eq!(status, 200);
    assert_eq!(body["protocol"], 1);
    let (_, scenarios) = c.get_json("/api/scenarios", None).await;
    assert_eq!(scenarios, json!(["default"]));

    let s = c.create(7).await;
    assert_eq!(s.codes.len(), 8);
    let (status, lobby) = c.get_json(&format!("/api/sessions/{}/lobby", s.id), None).await;
    assert_eq!(status, 200);
    assert_eq!(lobby["status"], "lobby");
    assert_eq!(lobby["seats"].as_array().unwrap().len(), 8);

    let (status, joined) = c
        .post(
            &format!("/api/sessions/{}/join", s.id),
            None,
            json!({ "join_code": s.codes["us_president"] }),
        )
        .await;
    assert_eq!(status, 200);
    assert_eq!(joined["role"], "us_president");
    assert!(!joined["briefing"].as_str().unwrap().is_empty());

    let (status, again) = c
        .post(
            &format!("/api/sessions/{}/join", s.id),
            None,
            json!({ "join_code": s.codes["us_president"] }),
        )
        .await;
    assert_eq!(status, 409);
    assert_eq!(again["error"], "CodeClaimed");

    let (_, list) = c.get_json("/api/sessions", None).await;
    assert_eq!(list[0]["open_roles"].as_array().unwrap().len(), 7);

    let (status, _) = c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    assert_eq!(status, 200);
    let (status, late) = c
        .post(
            &format!("/api/sessions/{}/join", s.id),
            None,
            json!({ "join_code": s.codes["prc_president"] }),
        )
        .await;
    assert_eq!(status, 409);
    assert_eq!(late["error"], "SessionRunning");
}

#[tokio::test]
async fn create_errors() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let (status, body) = c
        .post("/api/sessions", None, json!({ "scenario_id": "atlantis" }))
        .await;
    assert_eq!(status, 404);
    assert_eq!(body["error"], "UnknownScenario");
    let (status, body) = c
        .post("/api/sessions", None, json!({ "config": { "num_turns": 9 } }))
        .await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "InvalidScenario");
    let (status, _) = c
        .post("/api/sessions", None, json!({ "config": { "turns": 4 } }))
        .await;
    assert_eq!(status, 422);
    let (status, body) = c.get_json("/api/sessions/ffffff/lobby", None).await;
    assert_eq!(status, 404);
    assert_eq!(body["error"], "UnknownSession");
}

#[tokio::test]
async fn commands_need_the_right_token() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(3).await;
    let us = c.join(&s, "us_president").await;

    let (status, body) = c.command(&s, "not-a-token", json!({ "type": "start" })).await;
    assert_eq!(status, 401);
    assert_eq!(body["error"], "UnknownToken");
    let (status, body) = c.command(&s, &us, json!({ "type": "start" })).await;
    assert_eq!(status, 403);
    assert_eq!(body["error"], "NotFacilitator");
    let (status, _) = c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    assert_eq!(status, 200);

    let (status, body) = c
        .command(&s, &s.facilitator, json!({ "type": "send_message", "text": "hi" }))
        .await;
    assert_eq!(status, 403);
    assert_eq!(body["error"], "NoRole");
    let (status, body) = c
        .command(
            &s,
            &us,
            json!({ "type": "submit_orders", "orders": [{
                "issuing_role": "us_president",
                "phase_tag": "private",
                "action": { "kind": "SafetyInvestment", "talent": 1 }
            }]}),
        )
        .await;
    assert_eq!(status, 422, "{body}");
    assert_eq!(body["error"], "WrongPhase");

    let (status, body) = c
        .command(&s, &us, json!({ "type": "send_message", "text": "hello all" }))
        .await;
    assert_eq!(status, 200);
    assert!(body["seq"].as_u64().unwrap() > 0);
    let (status, _) = c.command(&s, &us, json!({ "type": "launch_missiles" })).await;
    assert_eq!(status, 422);
}

#[tokio::test]
async fn views_are_filtered_per_token() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(11).await;
    let us = c.join(&s, "us_president").await;
    let prc = c.join(&s, "prc_president").await;
    let ceo = c.join(&s, "alphabet_ceo").await;
    c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    c.command(
        &s,
        &us,
        json!({ "type": "send_message", "to": ["prc_president"], "text": "back channel" }),
    )
    .await;

    let seen = |v: &serde_json::Value| {
        v["events"]
            .as_array()
            .unwrap()
            .iter()
            .any(|e| e.to_string().contains("back channel"))
    };
    assert!(seen(&c.view(&s, &us, 0).await));
    assert!(seen(&c.view(&s, &prc, 0).await));
    assert!(!seen(&c.view(&s, &ceo, 0).await));
    let fac = c.view(&s, &s.facilitator, 0).await;
    assert!(seen(&fac));
    assert!(fac.get("world").is_some());
    let ceo_view = c.view(&s, &ceo, 0).await;
    assert!(ceo_view.get("world").is_none());
    assert_eq!(ceo_view["own"]["id"], "alphabet");

    // Incremental fetches only carry newer events.
    let last = fac["events"].as_array().unwrap().last().unwrap()["seq"].as_u64().unwrap();
    assert!(c.view(&s, &us, last).await["events"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn log_and_debrief_permissions() {
    let server = Server::in_memory().await;
    let c = Client::new(&server);
    let s = c.create(5).await;
    let us = c.join(&s, "us_president").await;
    let log_path = format!("/api/sessions/{}/log", s.id);
    let debrief_path = format!("/api/sessions/{}/debrief", s.id);

    let (status, _) = c.get(&log_path, Some(&s.facilitator)).await;
    assert_eq!(status, 409, "no game before start");
    c.command(&s, &s.facilitator, json!({ "type": "start" })).await;
    let (status, _) = c.get(&log_path, Some(&us)).await;
    assert_eq!(status, 403);
    let (status, _) = c.get(&debrief_path, Some(&us)).await;
    assert_eq!(status, 422);
    let (status, log) = c.get(&log_path, Some(&s.facilitator)).await;
    assert_eq!(status, 200);
    assert!(replay_jsonl(&log).is_ok());

    loop {
        let phase = c.view(&s, &s.facilitator, u64::MAX).await["phase"].clone();
        if phase == "Debrief" {
            break;
        }
        let (status, body) = c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
        assert_eq!(status, 200, "{body}");
    }
    let (status, report) = c.command(&s, &s.facilitator, json!({ "type": "debrief" })).await;
    assert_eq!(status, 200);
    assert_eq!(report["scores"].as_array().unwrap().len(), 8);

    let (status, log) = c.get(&log_path, Some(&us)).await;
    assert_eq!(status, 200);
    let game = replay_jsonl(&log).unwrap();
    assert_eq!(game.phase(), futuresim_core::Phase::Finished);
    let (status, body) = c.get_json(&debrief_path, Some(&us)).await;
    assert_eq!(status, 200);
    assert_eq!(body, report);
    let (status, body) = c.command(&s, &s.facilitator, json!({ "type": "advance_phase" })).await;
    assert_eq!(status, 409);
    assert_eq!(body["error"], "SessionNotRunning");
}

