use futuresim_core::engine::{replay_jsonl, replay_until, DebriefReport};
use futuresim_core::{EventPayload, GameState, OrgId, Phase};
use serde::Serialize;
use serde_json::json;

use crate::{table, CmdResult, Failure, ReplayArgs};

#[derive(Debug, Serialize)]
pub struct OrgLine {
    pub id: OrgId,
    pub kind: String,
    pub funds: i64,
    pub talent: i64,
    pub influence: i64,
    pub techs: Vec<String>,
    pub deployed: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub turns_resolved: i64,
    pub num_turns: i64,
    pub year: i64,
    pub phase: Phase,
    pub chaos: i64,
    pub orgs: Vec<OrgLine>,
    pub narrative: Vec<String>,
    pub last_seq: u64,
    pub digest: String,
}

fn turns_resolved(g: &GameState) -> i64 {
    g.events()
        .iter()
        .filter(|e| matches!(e.body, EventPayload::PhaseChanged { from: Phase::WorldUpdate, .. }))
        .count() as i64
}

pub fn summarize(g: &GameState) -> Summary {
    let w = g.world();
    Summary {
        scenario: g.scenario().id.clone(),
        seed: g.seed(),
        turns_resolved: turns_resolved(g),
        num_turns: g.scenario().num_turns,
        year: w.year,
        phase: w.phase,
        chaos: w.chaos,
        orgs: w
            .orgs
            .values()
            .map(|o| OrgLine {
                id: o.id.clone(),
                kind: format!("{:?}", o.kind),
                funds: o.funds,
                talent: o.talent_pool,
                influence: o.influence,
                techs: o.unlocked_techs.iter().map(ToString::to_string).collect(),
                deployed: o.deployed_products.iter().map(ToString::to_string).collect(),
            })
            .collect(),
        narrative: w.narrative.clone(),
        last_seq: g.last_seq(),
        digest: g.digest(),
    }
}

fn print_summary(s: &Summary) {
    println!(
        "scenario {}, seed {}, {}/{} turns resolved",
        s.scenario, s.seed, s.turns_resolved, s.num_turns
    );
    println!("year {}, phase {}, chaos {}", s.year, s.phase, s.chaos);
    let rows: Vec<Vec<String>> = s
        .orgs
        .iter()
        .map(|o| {
            vec![
                o.id.to_string(),
                o.kind.clone(),
                o.funds.to_string(),
                o.talent.to_string(),
                o.influence.to_string(),
                o.techs.len().to_string(),
                o.deployed.join(" "),
            ]
        })
        .collect();
    print!(
        "{}",
        table::render(&["org", "kind", "funds", "talent", "influence", "techs", "deployed"], &rows)
    );
    println!("event {} digest {}", s.last_seq, s.digest);
}

fn print_debrief(r: &DebriefReport) {
    println!("debrief: year {}, chaos {}", r.final_year, r.final_chaos);
    let rows: Vec<Vec<String>> = r
        .scores
        .iter()
        .map(|s| vec![s.role.to_string(), s.org.to_string(), format!("{:.2}", s.score)])
        .collect();
    print!("{}", table::render(&["role", "org", "score"], &rows));
    println!("private projects");
    let mut rows = Vec::new();
    for (org, projects) in &r.private_projects {
        for p in projects {
            rows.push(vec![
                org.to_string(),
                format!("{:?}", p.kind).to_lowercase(),
                p.target.clone(),
                (p.started_turn + 1).to_string(),
                p.progress.to_string(),
                p.completed_turn.map_or_else(|| "-".to_owned(), |t| (t + 1).to_string()),
            ]);
        }
    }
    if rows.is_empty() {
        println!("(none)");
    } else {
        print!(
            "{}",
            table::render(&["org", "kind", "target", "started", "progress", "completed"], &rows)
        );
    }
}

pub fn run(args: &ReplayArgs, json: bool) -> CmdResult {
    let text = std::fs::read_to_string(&args.log)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", args.log.display())))?;
    let mut game = replay_jsonl(&text).map_err(|e| Failure::new(1, e.to_string()))?;
    let at = match args.to_turn {
        None => None,
        Some(k) => {
            let resolved = turns_resolved(&game);
            if !(0..=resolved).contains(&k) {
                return Err(Failure::new(
                    1,
                    format!("--to-turn {k} out of range: the log has {resolved} resolved turn(s)"),
                ));
            }
            // Turn k (1-based) closes with the events stamped k - 1.
            let g = replay_until(game.events(), k - 1).map_err(|e| Failure::new(1, e.to_string()))?;
            Some(summarize(&g))
        }
    };
    let summary = at.unwrap_or_else(|| summarize(&game));
    let report = if args.debrief {
        if !matches!(game.phase(), Phase::Debrief | Phase::Finished) {
            return Err(Failure::new(
                1,
                format!("the game has not reached its debrief (phase {})", game.phase()),
            ));
        }
        Some(game.debrief().map_err(|e| Failure::new(1, e.to_string()))?)
    } else {
        None
    };
    if json {
        let mut v = json!({ "ok": true, "summary": summary });
        if let Some(r) = &report {
            let mut r = serde_json::to_value(r).expect("report serializes");
            // The log itself is the input; no need to echo it.
            r.as_object_mut().expect("object").remove("events");
            v["debrief"] = r;
        }
        println!("{v}");
    } else {
        print_summary(&summary);
        if let Some(r) = &report {
            print_debrief(r);
        }
    }
    Ok(())
}
