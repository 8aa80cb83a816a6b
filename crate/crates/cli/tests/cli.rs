use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Output, Stdio};
use std::time::{Duration, Instant};

use futuresim_core::agents::{play_game, PolicyAssignment};
use futuresim_core::content::{default_scenario, default_scenario_source};
use futuresim_core::engine::{replay_jsonl, replay_until};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_futuresim"));
    for var in ["FUTURESIM_BIND_ADDR", "FUTURESIM_DATA_DIR", "FUTURESIM_CONTENT_DIR"] {
        c.env_remove(var);
    }
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn cyclic_scenario() -> String {
    let mut v: Value = serde_json::from_str(default_scenario_source()).unwrap();
    let techs = v["scenario"]["tech_tree"].as_array_mut().unwrap();
    let (child, parent) = techs
        .iter()
        .find_map(|t| {
            let p = t["prerequisites"].as_array()?.first()?.clone();
            Some((t["id"].clone(), p))
        })
        .unwrap();
    let parent = techs.iter_mut().find(|t| t["id"] == parent).unwrap();
    parent["prerequisites"] = json!([child]);
    serde_json::to_string_pretty(&v).unwrap()
}

fn mixed() -> Vec<&'static str> {
    vec![
        "--policies",
        "us_president=safety_cooperator,prc_president=aggressive_defector",
        "--policies",
        "alphabet_ceo=greedy_tech,*=random_legal",
    ]
}

#[test]
fn validate_reports_every_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", default_scenario_source());
    let o = run(&["validate", ok.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "OK");
    let o = run(&["validate", "--json", ok.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], true);

    let bad = write(dir.path(), "cyclic.json", &cyclic_scenario());
    let o = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("CyclicTechTree"), "{}", stdout(&o));
    let o = run(&["--json", "validate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["detail"][0]["rule"], "CyclicTechTree");

    let o = run(&["validate", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let junk = write(dir.path(), "junk.json", "{ not json");
    assert_eq!(code(&run(&["validate", junk.to_str().unwrap()])), 2);
}

#[test]
fn simulate_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--n", "1000", "--seed", "5"];
    args.extend(mixed());
    let out = dir.path().join("big");
    args.extend(["--out", out.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("final_chaos"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 1000);
    assert_eq!(report["assignment"]["us_president"], "safety_cooperator");
    assert_eq!(report["assignment"]["tencent_ceo"], "random_legal");
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);

    let twice: Vec<(String, String)> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let mut args = vec!["simulate", "--n", "20", "--seed", "9", "--out", out.to_str().unwrap()];
            args.extend(mixed());
            assert_eq!(code(&run(&args)), 0);
            (
                std::fs::read_to_string(out.join("results.json")).unwrap(),
                std::fs::read_to_string(out.join("results.csv")).unwrap(),
            )
        })
        .collect();
    assert_eq!(twice[0], twice[1]);
}

#[test]
fn simulate_rejects_bad_input() {
    let mut zero = vec!["simulate", "--n", "0"];
    zero.extend(mixed());
    assert_eq!(code(&run(&zero)), 1);
    assert_eq!(code(&run(&["simulate", "--n", "3", "--policies", "*=chaos_monkey"])), 1);
    assert_eq!(code(&run(&["simulate", "--n", "3", "--policies", "us_president=greedy_tech"])), 1);
    assert_eq!(
        code(&run(&["simulate", "--n", "3", "--scenario", "atlantis", "--policies", "*=greedy_tech"])),
        1
    );
    assert_eq!(code(&run(&["simulate", "--n", "many"])), 1);

    let o = run(&["simulate", "--json", "--n", "4", "--policies", "*=greedy_tech"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_games"], 4);
    assert!(v["aggregates"]["final_chaos"]["mean"].is_number());
}

fn finished_log(dir: &Path) -> (PathBuf, String) {
    let s = default_scenario();
    let assignment: PolicyAssignment = s
        .roles
        .iter()
        .map(|r| (r.id.clone(), "greedy_tech".to_owned()))
        .collect();
    let (game, _) = play_game(&s, &assignment, 77).unwrap();
    let text = game.to_jsonl();
    (write(dir, "game.jsonl", &text), text)
}

#[test]
fn replay_summarizes_and_debriefs() {
    let dir = tempfile::tempdir().unwrap();
    let (log, text) = finished_log(dir.path());
    let game = replay_jsonl(&text).unwrap();

    let o = run(&["replay", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("6/6 turns resolved"), "{}", stdout(&o));
    assert!(stdout(&o).contains(&game.digest()));

    let o = run(&["replay", log.to_str().unwrap(), "--debrief"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("us_president") && out.contains("private projects"), "{out}");
    let o = run(&["replay", "--json", log.to_str().unwrap(), "--debrief"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["debrief"]["scores"].as_array().unwrap().len(), 8);
    let hidden: usize = v["debrief"]["private_projects"]
        .as_object()
        .unwrap()
        .values()
        .map(|p| p.as_array().unwrap().len())
        .sum();
    let rows = out.lines().skip_while(|l| *l != "private projects").count() - 2;
    assert_eq!(rows, hidden, "{out}");

    let o = run(&["replay", "--json", log.to_str().unwrap(), "--to-turn", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let at3 = replay_until(game.events(), 2).unwrap();
    assert_eq!(v["summary"]["turns_resolved"], 3);
    assert_eq!(v["summary"]["digest"], at3.digest());
    assert_eq!(v["summary"]["year"], at3.world().year);
    assert_eq!(code(&run(&["replay", log.to_str().unwrap(), "--to-turn", "7"])), 1);
}

#[test]
fn replay_refuses_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text) = finished_log(dir.path());
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(lines.len() / 2);
    let cut = write(dir.path(), "cut.jsonl", &(lines.join("\n") + "\n"));
    let o = run(&["replay", cut.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = run(&["replay", "--json", cut.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], false);
    assert_eq!(code(&run(&["replay", dir.path().join("nope.jsonl").to_str().unwrap()])), 2);
}

struct Host {
    child: Child,
    base: String,
    // Held so the host never writes to a closed pipe.
    _stdout: BufReader<ChildStdout>,
}

fn host(data: &Path, extra: &[&str], env: &[(&str, &str)]) -> Host {
    let mut cmd = bin();
    cmd.args(["host", "--data-dir", data.to_str().unwrap()])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    let mut line = String::new();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    stdout.read_line(&mut line).unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_owned();
    Host {
        child,
        base,
        _stdout: stdout,
    }
}

impl Host {
    fn request(&self, method: &str, path: &str, token: Option<&str>, body: &Value) -> (u16, Value) {
        let mut s = TcpStream::connect(&self.base).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let body = body.to_string();
        let auth = token.map_or_else(String::new, |t| format!("Authorization: Bearer {t}\r\n"));
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: {}\r\nConnection: close\r\nContent-Type: application/json\r\n{auth}Content-Length: {}\r\n\r\n{body}",
            self.base,
            body.len()
        )
        .unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        let status = resp[9..12].parse().unwrap();
        let payload = resp.split_once("\r\n\r\n").unwrap().1;
        (status, serde_json::from_str(payload).unwrap_or(Value::Null))
    }

    fn interrupt(mut self) -> i32 {
        let pid = self.child.id().to_string();
        assert!(Command::new("kill").args(["-INT", &pid]).status().unwrap().success());
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Some(s) = self.child.try_wait().unwrap() {
                return s.code().unwrap_or(-1);
            }
            assert!(Instant::now() < deadline, "host did not stop");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

impl Drop for Host {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn host_persists_on_interrupt_and_restores() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let h = host(&data, &["--bind", "127.0.0.1:0"], &[]);
    let (status, created) = h.request("POST", "/api/sessions", None, &json!({ "config": { "seed": 3 } }));
    assert_eq!(status, 201);
    let id = created["session_id"].as_str().unwrap().to_owned();
    let fac = created["facilitator_token"].as_str().unwrap().to_owned();
    let (status, _) = h.request(
        "POST",
        &format!("/api/sessions/{id}/join"),
        None,
        &json!({ "join_code": created["join_codes"]["us_president"] }),
    );
    assert_eq!(status, 200);
    for cmd in ["start", "advance_phase"] {
        let (status, body) =
            h.request("POST", &format!("/api/sessions/{id}/commands"), Some(&fac), &json!({ "type": cmd }));
        assert_eq!(status, 200, "{body}");
    }
    assert_eq!(h.interrupt(), 0);

    let log = std::fs::read_to_string(data.join(&id).join("log.jsonl")).unwrap();
    let game = replay_jsonl(&log).unwrap();
    assert_eq!(game.phase(), futuresim_core::Phase::PrivateActions);

    let h = host(&data, &["--bind", "127.0.0.1:0"], &[]);
    let (status, lobby) = h.request("GET", &format!("/api/sessions/{id}/lobby"), None, &Value::Null);
    assert_eq!(status, 200);
    assert_eq!(lobby["status"], "running");
    let (status, body) =
        h.request("POST", &format!("/api/sessions/{id}/commands"), Some(&fac), &json!({ "type": "advance_phase" }));
    assert_eq!(status, 200, "{body}");
    assert_eq!(h.interrupt(), 0);
}

#[test]
fn host_fails_cleanly_on_a_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = busy.local_addr().unwrap().to_string();
    let o = bin()
        .args(["host", "--bind", &addr, "--data-dir", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot bind"));

    // The flag wins over the environment.
    let h = host(dir.path(), &["--bind", "127.0.0.1:0"], &[("FUTURESIM_BIND_ADDR", &addr)]);
    assert_ne!(h.base, addr);
    assert_eq!(h.interrupt(), 0);
    let o = bin()
        .args(["host", "--data-dir", dir.path().to_str().unwrap()])
        .env("FUTURESIM_BIND_ADDR", &addr)
        .output()
        .unwrap();
    assert_eq!(code(&o), 1, "the environment is used without the flag");
}
