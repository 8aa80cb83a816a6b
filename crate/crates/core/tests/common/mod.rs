#![allow(dead_code)]

use futuresim_core::agents::{decide, policy_by_name, policy_catalog, PolicyAssignment};
use futuresim_core::generate::random_scenario;
use futuresim_core::rng::{stream, StreamKey};
use futuresim_core::{
    new_game, Caller, EffectScope, EffectTarget, GameState, ParameterEffect, Phase, PlayerId,
    RoleId, Scenario, WorldEventSpec,
};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Scenario, seed and policy mix of the `i`-th random game.
pub fn random_setup(i: u64) -> (Scenario, u64, PolicyAssignment) {
    let scenario = random_scenario(i.wrapping_mul(7919).wrapping_add(1));
    let mut rng = stream(i, StreamKey::new(0, "setup", "", ""));
    let names: Vec<&'static str> = policy_catalog().iter().map(|p| p.name()).collect();
    let assignment = scenario
        .roles
        .iter()
        .map(|r| (r.id.clone(), (*names.choose(&mut rng).unwrap()).to_owned()))
        .collect();
    (scenario, rng.random(), assignment)
}

/// Plays a full game: scripted agents for orders, plus random negotiation
/// messages and facilitator-injected world events drawn from the seed.
pub fn drive(scenario: &Scenario, seed: u64, assignment: &PolicyAssignment) -> GameState {
    drive_observed(scenario, seed, assignment, |_| {})
}

/// Like [`drive`], calling `after_step` after every state-changing call.
pub fn drive_observed(
    scenario: &Scenario,
    seed: u64,
    assignment: &PolicyAssignment,
    mut after_step: impl FnMut(&GameState),
) -> GameState {
    let seats: Vec<(PlayerId, RoleId)> = scenario
        .roles
        .iter()
        .map(|r| (PlayerId::new(format!("seat:{}", r.id)), r.id.clone()))
        .collect();
    let mut g = new_game(scenario.clone(), seed, &seats).unwrap();
    after_step(&g);
    let roles: Vec<RoleId> = scenario.roles.iter().map(|r| r.id.clone()).collect();
    while !g.is_over() {
        let turn = g.world().turn;
        match g.phase() {
            Phase::Negotiation => {
                let mut rng = stream(seed, StreamKey::new(turn, "harness", "messages", ""));
                for _ in 0..rng.random_range(0..4) {
                    let from = roles.choose(&mut rng).unwrap().clone();
                    let to: Vec<RoleId> = roles
                        .iter()
                        .filter(|_| rng.random_bool(0.3))
                        .cloned()
                        .collect();
                    g.submit_message(&from, &to, &format!("note {turn} from {from}"))
                        .unwrap();
                    after_step(&g);
                }
                if rng.random_bool(0.25) {
                    g.inject_world_event(&Caller::Facilitator, random_event(scenario, &mut rng))
                        .unwrap();
                    after_step(&g);
                }
            }
            Phase::PrivateActions | Phase::PublicActions => {
                let step = if g.phase() == Phase::PrivateActions {
                    "agent-private"
                } else {
                    "agent-public"
                };
                for role in &scenario.roles {
                    let view = g.player_view_since(&role.id, g.last_seq()).unwrap();
                    let policy = policy_by_name(&assignment[&role.id]).unwrap();
                    let mut rng = stream(seed, StreamKey::new(turn, step, role.id.as_str(), ""));
                    let d = decide(policy.as_ref(), &view, scenario, &mut rng);
                    if !d.orders.is_empty() {
                        g.submit_orders(&role.id, d.orders).unwrap();
                        after_step(&g);
                    }
                }
            }
            _ => {}
        }
        g.advance_phase().unwrap();
        after_step(&g);
    }
    g.debrief().unwrap();
    after_step(&g);
    g
}

fn random_event(scenario: &Scenario, rng: &mut impl Rng) -> WorldEventSpec {
    let mut effects = vec![ParameterEffect::chaos(rng.random_range(-8..=12))];
    let org = scenario.organizations.choose(rng).unwrap();
    effects.push(ParameterEffect {
        target: EffectTarget::OrgFunds,
        delta: rng.random_range(-4..=4),
        scope: EffectScope::Org(org.id.clone()),
    });
    WorldEventSpec {
        id: format!("injected_{}", rng.random::<u16>()).into(),
        name: "Facilitator event".into(),
        threshold: None,
        narrative: format!("Something happens to {}.", org.name),
        effects,
    }
}

pub fn random_game(i: u64) -> GameState {
    let (scenario, seed, assignment) = random_setup(i);
    drive(&scenario, seed, &assignment)
}
