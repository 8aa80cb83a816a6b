//! End-of-game reveal and scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::GameError;
use crate::ids::{OrgId, RoleId};
use crate::model::{
    Actor, EventPayload, GameEvent, GoalMetric, OrganizationState, Phase, ProjectRecord,
    RoleSheet, Visibility, WorldState,
};

use super::GameState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleScore {
    pub role: RoleId,
    pub org: OrgId,
    pub score: f64,
    /// Metric value per goal term, in goal order.
    pub terms: Vec<(GoalMetric, f64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebriefReport {
    pub final_year: i64,
    pub final_chaos: i64,
    pub scores: Vec<RoleScore>,
    /// Every private project, revealed.
    pub private_projects: BTreeMap<OrgId, Vec<ProjectRecord>>,
    pub orgs: BTreeMap<OrgId, OrganizationState>,
    pub narrative: Vec<String>,
    /// The complete, unredacted log.
    pub events: Vec<GameEvent>,
}

fn metric(world: &WorldState, org: &OrgId, m: GoalMetric) -> i64 {
    let o = &world.orgs[org];
    match m {
        GoalMetric::OwnFunds => o.funds,
        GoalMetric::OwnTechCount => o.unlocked_techs.len() as i64,
        GoalMetric::Stability => 100 - world.chaos,
        GoalMetric::Influence => o.influence,
    }
}

/// Weighted sum of the role's goal metrics.
pub fn score_role(world: &WorldState, sheet: &RoleSheet) -> RoleScore {
    let terms: Vec<_> = sheet
        .goal
        .iter()
        .map(|t| (t.metric, t.weight, metric(world, &sheet.organization, t.metric)))
        .collect();
    RoleScore {
        role: sheet.id.clone(),
        org: sheet.organization.clone(),
        score: terms.iter().map(|(_, w, v)| w * *v as f64).sum(),
        terms,
    }
}

impl GameState {
    /// Reveals hidden state and scores every role. The first call closes the
    /// game.
    pub fn debrief(&mut self) -> Result<DebriefReport, GameError> {
        match self.world.phase {
            Phase::Debrief => {
                self.emit(Actor::World, Visibility::Public, EventPayload::GameFinished {});
            }
            Phase::Finished => {}
            phase => return Err(GameError::WrongPhase { phase }),
        }
        Ok(self.debrief_report())
    }

    fn debrief_report(&self) -> DebriefReport {
        DebriefReport {
            final_year: self.world.year,
            final_chaos: self.world.chaos,
            scores: self
                .scenario
                .roles
                .iter()
                .map(|r| score_role(&self.world, r))
                .collect(),
            private_projects: self
                .world
                .orgs
                .iter()
                .map(|(id, o)| (id.clone(), o.private_projects().cloned().collect()))
                .collect(),
            orgs: self.world.orgs.clone(),
            narrative: self.world.narrative.clone(),
            events: self.event_log.clone(),
        }
    }
}
