use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{new_game, GameState};
use crate::error::GameError;
use crate::ids::{OrgId, PlayerId, RoleId, TechId};
use crate::model::{Action, EventPayload, Phase, Scenario};
use crate::rng::{stream, StreamKey};

use super::{decide, policy_by_name, Policy};

/// Policy name per role.
pub type PolicyAssignment = BTreeMap<RoleId, String>;

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
    #[error("a batch needs at least one game")]
    NoGames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Outcome metrics of one simulated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub index: u64,
    pub seed: u64,
    pub final_chaos: i64,
    pub tech_counts: BTreeMap<OrgId, usize>,
    /// Turn in which each tech was unlocked, per organization.
    pub unlock_turns: BTreeMap<OrgId, BTreeMap<TechId, i64>>,
    pub scores: BTreeMap<RoleId, f64>,
    /// Publications, matched collaborations and safety investments.
    pub cooperation_events: u64,
    pub tail_substitutions: u64,
    /// Agent order lists the engine refused. Zero for correct policies.
    pub rejected_orders: u64,
    pub digest: String,
}

impl GameRecord {
    /// Flat numeric metrics, as aggregated and written to CSV.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("final_chaos".to_owned(), self.final_chaos as f64);
        m.insert("cooperation_events".to_owned(), self.cooperation_events as f64);
        m.insert("tail_substitutions".to_owned(), self.tail_substitutions as f64);
        m.insert("rejected_orders".to_owned(), self.rejected_orders as f64);
        for (org, n) in &self.tech_counts {
            m.insert(format!("techs:{org}"), *n as f64);
        }
        for (role, s) in &self.scores {
            m.insert(format!("score:{role}"), *s);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Aggregate {
    /// Summary of a non-empty sample. Quartiles interpolate linearly.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "aggregate of empty sample");
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            max: v[v.len() - 1],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub scenario: String,
    pub n_games: u64,
    pub base_seed: u64,
    pub assignment: PolicyAssignment,
    pub records: Vec<GameRecord>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl BatchResult {
    pub fn from_records(
        scenario: String,
        base_seed: u64,
        assignment: PolicyAssignment,
        records: Vec<GameRecord>,
    ) -> Self {
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &records {
            for (k, v) in r.metrics() {
                columns.entry(k).or_default().push(v);
            }
        }
        let aggregates = columns
            .into_iter()
            .map(|(k, v)| (k, Aggregate::of(&v)))
            .collect();
        Self {
            scenario,
            n_games: records.len() as u64,
            base_seed,
            assignment,
            records,
            aggregates,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("batch result serializes")
    }

    /// One row per game: index, seed, every metric column, digest.
    pub fn to_csv(&self) -> String {
        let columns: Vec<String> = self.aggregates.keys().cloned().collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index".to_owned(), "seed".to_owned()];
        header.extend(columns.iter().cloned());
        header.push("digest".to_owned());
        w.write_record(&header).expect("in-memory csv");
        for r in &self.records {
            let m = r.metrics();
            let mut row = vec![r.index.to_string(), r.seed.to_string()];
            row.extend(
                columns
                    .iter()
                    .map(|c| m.get(c).map_or_else(String::new, |v| v.to_string())),
            );
            row.push(r.digest.clone());
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

fn resolve_policies(
    scenario: &Scenario,
    assignment: &PolicyAssignment,
) -> Result<BTreeMap<RoleId, Box<dyn Policy>>, BatchError> {
    let mut out = BTreeMap::new();
    for role in &scenario.roles {
        let name = assignment.get(&role.id).ok_or_else(|| {
            GameError::IncompleteAssignment(format!("role '{}' has no policy", role.id))
        })?;
        let p = policy_by_name(name).ok_or_else(|| BatchError::UnknownPolicy(name.clone()))?;
        out.insert(role.id.clone(), p);
    }
    if let Some(extra) = assignment.keys().find(|r| scenario.role(r).is_none()) {
        return Err(GameError::IncompleteAssignment(format!("unknown role '{extra}'")).into());
    }
    Ok(out)
}

/// Plays one full game with scripted agents and no free text. Returns the
/// final state (debriefed) and its record.
pub fn play_game(
    scenario: &Scenario,
    assignment: &PolicyAssignment,
    seed: u64,
) -> Result<(GameState, GameRecord), BatchError> {
    let policies = resolve_policies(scenario, assignment)?;
    play_with(scenario, &policies, seed, 0)
}

fn play_with(
    scenario: &Scenario,
    policies: &BTreeMap<RoleId, Box<dyn Policy>>,
    seed: u64,
    index: u64,
) -> Result<(GameState, GameRecord), BatchError> {
    let seats: Vec<(PlayerId, RoleId)> = scenario
        .roles
        .iter()
        .map(|r| (PlayerId::new(format!("agent:{}", r.id)), r.id.clone()))
        .collect();
    let mut g = new_game(scenario.clone(), seed, &seats)?;
    let mut tails = 0;
    let mut rejected = 0;
    while !g.is_over() {
        let phase = g.phase();
        if phase.order_tag().is_some() {
            let step = match phase {
                Phase::PrivateActions => "agent-private",
                _ => "agent-public",
            };
            for role in &scenario.roles {
                let view = g.player_view_since(&role.id, g.last_seq())?;
                let key = StreamKey::new(g.world().turn, step, role.id.as_str(), "");
                let mut rng = stream(seed, key);
                let d = decide(policies[&role.id].as_ref(), &view, scenario, &mut rng);
                tails += u64::from(d.tail_substituted);
                if d.orders.is_empty() {
                    continue;
                }
                if g.submit_orders(&role.id, d.orders).is_err() {
                    rejected += 1;
                }
            }
        }
        g.advance_phase()?;
    }
    let report = g.debrief()?;

    let mut unlock_turns: BTreeMap<OrgId, BTreeMap<TechId, i64>> = BTreeMap::new();
    let mut cooperation = 0;
    for e in g.events() {
        match &e.body {
            EventPayload::TechUnlocked { org, tech, .. } => {
                unlock_turns.entry(org.clone()).or_default().insert(tech.clone(), e.turn);
            }
            EventPayload::TechPublished { .. } => cooperation += 1,
            EventPayload::ResearchRolled {
                partner: Some(_), ..
            } => cooperation += 1,
            EventPayload::OrdersSubmitted { orders, .. } => {
                cooperation += orders
                    .iter()
                    .filter(|o| matches!(o.action, Action::SafetyInvestment { .. }))
                    .count() as u64;
            }
            _ => {}
        }
    }
    let record = GameRecord {
        index,
        seed,
        final_chaos: g.world().chaos,
        tech_counts: g
            .world()
            .orgs
            .iter()
            .map(|(id, o)| (id.clone(), o.unlocked_techs.len()))
            .collect(),
        unlock_turns,
        scores: report.scores.iter().map(|s| (s.role.clone(), s.score)).collect(),
        cooperation_events: cooperation,
        tail_substitutions: tails,
        rejected_orders: rejected,
        digest: g.digest(),
    };
    Ok((g, record))
}

/// Runs `n_games` games with seeds `base_seed + i`, in parallel.
pub fn run_batch(
    scenario: &Scenario,
    assignment: &PolicyAssignment,
    n_games: u64,
    base_seed: u64,
) -> Result<BatchResult, BatchError> {
    run_batch_with(scenario, assignment, n_games, base_seed, Execution::Parallel)
}

pub fn run_batch_with(
    scenario: &Scenario,
    assignment: &PolicyAssignment,
    n_games: u64,
    base_seed: u64,
    execution: Execution,
) -> Result<BatchResult, BatchError> {
    if n_games == 0 {
        return Err(BatchError::NoGames);
    }
    let violations = crate::validate::validate_scenario(scenario);
    if !violations.is_empty() {
        return Err(GameError::InvalidScenario(violations).into());
    }
    let policies = resolve_policies(scenario, assignment)?;
    let one = |i: u64| {
        play_with(scenario, &policies, base_seed.wrapping_add(i), i).map(|(_, rec)| rec)
    };
    let records: Result<Vec<GameRecord>, BatchError> = match execution {
        Execution::Parallel => (0..n_games).into_par_iter().map(one).collect(),
        Execution::Sequential => (0..n_games).map(one).collect(),
    };
    Ok(BatchResult::from_records(
        scenario.id.clone(),
        base_seed,
        assignment.clone(),
        records?,
    ))
}
