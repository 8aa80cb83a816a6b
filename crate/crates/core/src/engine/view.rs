//! Per-role fog of war.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::GameError;
use crate::ids::{OrgId, ProductId, RoleId, TechId};
use crate::model::{EventPayload, GameEvent, OrderKind, OrgKind, OrganizationState, Phase, Viewer};

use super::{GameState, PendingOrders};

/// What another organization shows the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgSummary {
    pub id: OrgId,
    pub name: String,
    pub kind: OrgKind,
    pub talent_pool: i64,
    pub funds: i64,
    pub influence: i64,
    pub deployed_products: BTreeSet<ProductId>,
}

/// Everything one role may know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredView {
    pub role: RoleId,
    pub org: OrgId,
    pub entitlements: Vec<OrderKind>,
    pub turn: i64,
    pub year: i64,
    pub phase: Phase,
    pub chaos: i64,
    pub own: OrganizationState,
    /// Pending orders of every role in the viewer's organization.
    pub team_orders: BTreeMap<RoleId, PendingOrders>,
    pub others: Vec<OrgSummary>,
    pub published: BTreeMap<TechId, BTreeSet<OrgId>>,
    /// Admitted events, oldest first.
    pub events: Vec<GameEvent>,
}

impl GameState {
    pub fn player_view(&self, role: &RoleId) -> Result<FilteredView, GameError> {
        self.player_view_since(role, 0)
    }

    /// Like [`player_view`](Self::player_view) but only carries events with
    /// `seq > since`.
    pub fn player_view_since(&self, role: &RoleId, since: u64) -> Result<FilteredView, GameError> {
        let sheet = self
            .scenario
            .role(role)
            .ok_or_else(|| GameError::UnknownRole(role.clone()))?;
        let org = sheet.organization.clone();
        let viewer = Viewer::Role { role, org: &org };
        let events = self
            .event_log
            .iter()
            .filter(|e| e.seq > since && e.visibility.admits(viewer))
            .map(redact_seed)
            .collect();
        let team_orders = self
            .pending_orders
            .iter()
            .filter(|(r, _)| self.scenario.role(r).is_some_and(|s| s.organization == org))
            .map(|(r, p)| (r.clone(), p.clone()))
            .collect();
        let others = self
            .world
            .orgs
            .values()
            .filter(|o| o.id != org)
            .map(|o| OrgSummary {
                id: o.id.clone(),
                name: self
                    .scenario
                    .organization(&o.id)
                    .map_or_else(|| o.id.to_string(), |s| s.name.clone()),
                kind: o.kind,
                talent_pool: o.talent_pool,
                funds: o.funds,
                influence: o.influence,
                deployed_products: o.deployed_products.clone(),
            })
            .collect();
        Ok(FilteredView {
            role: role.clone(),
            entitlements: sheet.entitlements.clone(),
            turn: self.world.turn,
            year: self.world.year,
            phase: self.world.phase,
            chaos: self.world.chaos,
            own: self.world.orgs[&org].clone(),
            team_orders,
            others,
            published: self.world.published.clone(),
            events,
            org,
        })
    }

    /// The facilitator sees the whole log.
    pub fn facilitator_events_since(&self, since: u64) -> Vec<GameEvent> {
        self.event_log
            .iter()
            .filter(|e| e.seq > since && e.visibility.admits(Viewer::Facilitator))
            .cloned()
            .collect()
    }
}

/// Players never learn the seed: it would let them predict their own dice.
/// Their copy of the genesis event carries seed 0.
fn redact_seed(e: &GameEvent) -> GameEvent {
    let mut e = e.clone();
    if let EventPayload::GameCreated { seed, .. } = &mut e.body {
        *seed = 0;
    }
    e
}
