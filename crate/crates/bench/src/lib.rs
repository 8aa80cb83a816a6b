//! Fixtures shared by the benchmarks.

use futuresim_core::agents::{play_game, PolicyAssignment};
use futuresim_core::content::default_scenario;
use futuresim_core::{GameState, Scenario};

/// Every role of `scenario` on `policy`.
pub fn uniform(scenario: &Scenario, policy: &str) -> PolicyAssignment {
    scenario
        .roles
        .iter()
        .map(|r| (r.id.clone(), policy.to_owned()))
        .collect()
}

/// A finished default-scenario game.
pub fn finished_game(seed: u64) -> GameState {
    let s = default_scenario();
    play_game(&s, &uniform(&s, "greedy_tech"), seed)
        .expect("scripted game")
        .0
}
