//! The authoritative game state machine.
//!
//! Every mutation is an event: command handlers validate their input, decide
//! outcomes (including dice), and append events; [`apply`](apply::apply)
//! folds each event into the state. Replaying the log through the same fold
//! reproduces the state exactly.

mod apply;
pub mod chaos;
mod debrief;
mod log;
mod resolve;
mod view;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use chaos::{update_chaos, ChaosUpdate, TurnActions};
pub use debrief::{score_role, DebriefReport, RoleScore};
pub use log::{
    canonical_json, event_line, parse_log, replay, replay_journal, replay_jsonl, replay_observed, replay_until,
    ParsedLog,
    DIGEST_KEY,
};
pub use resolve::ResolutionReport;
pub use view::{FilteredView, OrgSummary};

use crate::error::GameError;
use crate::ids::{OrgId, PlayerId, RoleId};
use crate::model::{
    Action, Actor, EffectScope, EffectTarget, EventPayload, GameEvent, OrderKind, OrgKind, Order, OrderRef,
    Phase, PhaseTag, Ruling, RulingDelta, Scenario, Visibility, WorldEventSpec, WorldState,
};
use crate::validate::validate_scenario;

pub const MAX_FREE_TEXT_LEN: usize = 4000;

/// Who is issuing a command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caller {
    Facilitator,
    Role(RoleId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingOrders {
    pub private: Vec<Order>,
    pub public: Vec<Order>,
}

impl PendingOrders {
    pub fn get(&self, tag: PhaseTag) -> &[Order] {
        match tag {
            PhaseTag::Private => &self.private,
            PhaseTag::Public => &self.public,
        }
    }

    fn set(&mut self, tag: PhaseTag, orders: Vec<Order>) {
        match tag {
            PhaseTag::Private => self.private = orders,
            PhaseTag::Public => self.public = orders,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Order> {
        self.private.iter().chain(self.public.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulingEntry {
    pub order: OrderRef,
    pub ruling: Ruling,
}

/// Full authoritative state of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    scenario: Scenario,
    world: WorldState,
    event_log: Vec<GameEvent>,
    pending_orders: BTreeMap<RoleId, PendingOrders>,
    rulings: Vec<RulingEntry>,
    queued_events: Vec<WorldEventSpec>,
    rng_seed: u64,
    /// Dice drawn per stream label.
    rng_cursor: BTreeMap<String, u64>,
    assignments: BTreeMap<RoleId, PlayerId>,
}

/// Starts a game. `assignments` pairs players with roles; every role must
/// appear exactly once.
pub fn new_game(
    scenario: Scenario,
    seed: u64,
    assignments: &[(PlayerId, RoleId)],
) -> Result<GameState, GameError> {
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(GameError::InvalidScenario(violations));
    }
    let mut seated: BTreeMap<RoleId, PlayerId> = BTreeMap::new();
    let mut problems = Vec::new();
    for (player, role) in assignments {
        if scenario.role(role).is_none() {
            problems.push(format!("unknown role '{role}'"));
        } else if seated.insert(role.clone(), player.clone()).is_some() {
            problems.push(format!("role '{role}' assigned more than once"));
        }
    }
    for r in &scenario.roles {
        if !seated.contains_key(&r.id) {
            problems.push(format!("role '{}' unassigned", r.id));
        }
    }
    if !problems.is_empty() {
        return Err(GameError::IncompleteAssignment(problems.join("; ")));
    }
    let genesis = GameEvent {
        seq: 1,
        turn: 0,
        phase: Phase::Negotiation,
        actor: Actor::Facilitator,
        visibility: Visibility::Public,
        body: EventPayload::GameCreated {
            scenario: Box::new(scenario),
            seed,
            assignments: seated,
        },
    };
    GameState::from_genesis(genesis)
}

impl GameState {
    pub(crate) fn from_genesis(event: GameEvent) -> Result<Self, GameError> {
        let EventPayload::GameCreated {
            scenario,
            seed,
            assignments,
        } = &event.body
        else {
            return Err(GameError::CorruptLog("log must begin with GameCreated".into()));
        };
        if event.seq != 1 {
            return Err(GameError::CorruptLog("GameCreated must have seq 1".into()));
        }
        let scenario = (**scenario).clone();
        let orgs = scenario
            .organizations
            .iter()
            .map(|o| (o.id.clone(), crate::model::OrganizationState::from_spec(o)))
            .collect();
        let world = WorldState {
            turn: 0,
            year: scenario.start_year,
            phase: Phase::Negotiation,
            chaos: scenario.chaos_rules.initial,
            free_talent: scenario.market.initial_free_talent,
            orgs,
            published: BTreeMap::new(),
            narrative: Vec::new(),
        };
        Ok(Self {
            world,
            event_log: vec![event.clone()],
            pending_orders: BTreeMap::new(),
            rulings: Vec::new(),
            queued_events: Vec::new(),
            rng_seed: *seed,
            rng_cursor: BTreeMap::new(),
            assignments: assignments.clone(),
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn phase(&self) -> Phase {
        self.world.phase
    }

    pub fn events(&self) -> &[GameEvent] {
        &self.event_log
    }

    pub fn last_seq(&self) -> u64 {
        self.event_log.last().map_or(0, |e| e.seq)
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn assignments(&self) -> &BTreeMap<RoleId, PlayerId> {
        &self.assignments
    }

    pub fn pending_orders(&self) -> &BTreeMap<RoleId, PendingOrders> {
        &self.pending_orders
    }

    pub fn rulings(&self) -> &[RulingEntry] {
        &self.rulings
    }

    pub fn queued_events(&self) -> &[WorldEventSpec] {
        &self.queued_events
    }

    pub fn rng_cursor(&self) -> &BTreeMap<String, u64> {
        &self.rng_cursor
    }

    pub fn org_of(&self, role: &RoleId) -> Result<&OrgId, GameError> {
        self.scenario
            .role(role)
            .map(|r| &r.organization)
            .ok_or_else(|| GameError::UnknownRole(role.clone()))
    }

    pub fn is_over(&self) -> bool {
        matches!(self.world.phase, Phase::Debrief | Phase::Finished)
    }

    /// Appends an event and folds it into the state.
    pub(crate) fn emit(&mut self, actor: Actor, visibility: Visibility, body: EventPayload) -> u64 {
        let event = GameEvent {
            seq: self.last_seq() + 1,
            turn: self.world.turn,
            phase: self.world.phase,
            actor,
            visibility,
            body,
        };
        let seq = event.seq;
        apply::apply(self, &event).unwrap_or_else(|e| panic!("engine emitted {event:?}: {e}"));
        self.event_log.push(event);
        seq
    }

    /// Sends a negotiation message. An empty recipient list (or one naming
    /// every role) is a public broadcast.
    pub fn submit_message(
        &mut self,
        from: &RoleId,
        to: &[RoleId],
        text: &str,
    ) -> Result<u64, GameError> {
        if self.world.phase != Phase::Negotiation {
            return Err(GameError::WrongPhase {
                phase: self.world.phase,
            });
        }
        self.org_of(from)?;
        for r in to {
            self.org_of(r)?;
        }
        let recipients: BTreeSet<RoleId> = to.iter().cloned().collect();
        let broadcast = recipients.is_empty()
            || self.scenario.roles.iter().all(|r| recipients.contains(&r.id));
        let (to, visibility) = if broadcast {
            (Vec::new(), Visibility::Public)
        } else {
            let mut audience = recipients.clone();
            audience.insert(from.clone());
            (
                recipients.into_iter().collect(),
                Visibility::Roles {
                    roles: audience.into_iter().collect(),
                },
            )
        };
        Ok(self.emit(
            Actor::Role(from.clone()),
            visibility,
            EventPayload::MessageSent {
                from: from.clone(),
                to,
                text: text.to_owned(),
            },
        ))
    }

    /// Replaces `role`'s orders for the current action phase.
    pub fn submit_orders(&mut self, role: &RoleId, orders: Vec<Order>) -> Result<u64, GameError> {
        let tag = self.world.phase.order_tag().ok_or(GameError::WrongPhase {
            phase: self.world.phase,
        })?;
        let org = self.org_of(role)?.clone();
        self.validate_orders(role, &org, tag, &orders)?;
        Ok(self.emit(
            Actor::Role(role.clone()),
            Visibility::for_tag(tag, &org),
            EventPayload::OrdersSubmitted {
                role: role.clone(),
                phase_tag: tag,
                orders,
            },
        ))
    }

    /// Checks `orders` as if `role` submitted them now, without changing state.
    pub fn check_orders(&self, role: &RoleId, orders: &[Order]) -> Result<(), GameError> {
        let tag = self.world.phase.order_tag().ok_or(GameError::WrongPhase {
            phase: self.world.phase,
        })?;
        let org = self.org_of(role)?.clone();
        self.validate_orders(role, &org, tag, orders)
    }

    fn validate_orders(
        &self,
        role: &RoleId,
        org_id: &OrgId,
        tag: PhaseTag,
        orders: &[Order],
    ) -> Result<(), GameError> {
        let sheet = self
            .scenario
            .role(role)
            .ok_or_else(|| GameError::UnknownRole(role.clone()))?;
        let org = &self.world.orgs[org_id];
        for order in orders {
            if &order.issuing_role != role {
                return Err(GameError::InvalidOrder(format!(
                    "order issued by '{}' submitted for '{role}'",
                    order.issuing_role
                )));
            }
            if order.phase_tag != tag {
                return Err(GameError::WrongPhase {
                    phase: self.world.phase,
                });
            }
            if !sheet.may_issue(order.kind()) {
                return Err(GameError::NotEntitled {
                    role: role.clone(),
                    kind: order.kind(),
                });
            }
            self.validate_action(org_id, tag, &order.action)?;
        }

        let mut talent = 0;
        let mut funds = 0;
        for r in self.scenario.roles_of(org_id) {
            let Some(p) = self.pending_orders.get(&r.id) else {
                continue;
            };
            for o in p.iter() {
                if &r.id == role && o.phase_tag == tag {
                    continue;
                }
                talent += o.action.talent_committed();
                funds += o.action.funds_committed();
            }
        }
        talent += orders.iter().map(|o| o.action.talent_committed()).sum::<i64>();
        funds += orders.iter().map(|o| o.action.funds_committed()).sum::<i64>();
        if talent > org.talent_pool {
            return Err(GameError::InsufficientTalent {
                org: org_id.clone(),
                requested: talent,
                available: org.talent_pool,
            });
        }
        if funds > org.funds.max(0) {
            return Err(GameError::InsufficientFunds {
                org: org_id.clone(),
                requested: funds,
                available: org.funds.max(0),
            });
        }
        Ok(())
    }

    fn validate_action(&self, org_id: &OrgId, tag: PhaseTag, action: &Action) -> Result<(), GameError> {
        let org = &self.world.orgs[org_id];
        let positive = |what: &str, v: i64| {
            if v >= 1 {
                Ok(())
            } else {
                Err(GameError::InvalidOrder(format!("{what} must be at least 1")))
            }
        };
        let other_org = |target: &OrgId| -> Result<&crate::model::OrganizationState, GameError> {
            let t = self
                .world
                .orgs
                .get(target)
                .ok_or_else(|| GameError::UnknownTarget(target.to_string()))?;
            if target == org_id {
                return Err(GameError::InvalidOrder("an organization cannot target itself".into()));
            }
            Ok(t)
        };
        let researchable = |tech: &crate::ids::TechId| -> Result<(), GameError> {
            let node = self
                .scenario
                .tech(tech)
                .ok_or_else(|| GameError::UnknownTarget(tech.to_string()))?;
            if org.unlocked_techs.contains(tech) {
                return Err(GameError::InvalidOrder(format!("{tech} is already unlocked")));
            }
            if !node.prerequisites.iter().all(|p| org.unlocked_techs.contains(p)) {
                return Err(GameError::PrerequisiteLocked {
                    org: org_id.clone(),
                    tech: tech.clone(),
                });
            }
            Ok(())
        };

        match action {
            Action::AllocateResearch {
                tech,
                talent,
                visibility,
            } => {
                positive("talent", *talent)?;
                if *visibility != tag {
                    return Err(GameError::InvalidOrder(
                        "project visibility must match the phase it is submitted in".into(),
                    ));
                }
                researchable(tech)?;
            }
            Action::AllocateDevelopment {
                product,
                talent,
                visibility,
            } => {
                positive("talent", *talent)?;
                if *visibility != tag {
                    return Err(GameError::InvalidOrder(
                        "project visibility must match the phase it is submitted in".into(),
                    ));
                }
                let card = self
                    .scenario
                    .product(product)
                    .ok_or_else(|| GameError::UnknownTarget(product.to_string()))?;
                if !org.unlocked_techs.contains(&card.required_tech) {
                    return Err(GameError::PrerequisiteLocked {
                        org: org_id.clone(),
                        tech: card.required_tech.clone(),
                    });
                }
                if org.developed_products.contains(product) {
                    return Err(GameError::InvalidOrder(format!("{product} is already developed")));
                }
            }
            Action::DeployProduct { product } => {
                self.scenario
                    .product(product)
                    .ok_or_else(|| GameError::UnknownTarget(product.to_string()))?;
                if !org.developed_products.contains(product) {
                    return Err(GameError::InvalidOrder(format!("{product} has not been developed")));
                }
                if org.deployed_products.contains(product) {
                    return Err(GameError::InvalidOrder(format!("{product} is already deployed")));
                }
            }
            Action::WithdrawProduct { product } => {
                self.scenario
                    .product(product)
                    .ok_or_else(|| GameError::UnknownTarget(product.to_string()))?;
                if !org.deployed_products.contains(product) {
                    return Err(GameError::InvalidOrder(format!("{product} is not deployed")));
                }
            }
            Action::Publish { tech } => {
                self.scenario
                    .tech(tech)
                    .ok_or_else(|| GameError::UnknownTarget(tech.to_string()))?;
                if !org.unlocked_techs.contains(tech) {
                    return Err(GameError::InvalidOrder(format!("{tech} has not been unlocked")));
                }
                if self
                    .world
                    .published
                    .get(tech)
                    .is_some_and(|by| by.contains(org_id))
                {
                    return Err(GameError::InvalidOrder(format!("{tech} is already published")));
                }
            }
            Action::Espionage { target_org, talent } => {
                other_org(target_org)?;
                positive("talent", *talent)?;
            }
            Action::PoachTalent {
                target_org,
                amount,
                funds_offered,
            } => {
                other_org(target_org)?;
                positive("amount", *amount)?;
                positive("funds_offered", *funds_offered)?;
            }
            Action::Regulate { .. } => {}
            Action::Tax {
                target_org,
                rate_percent,
            } => {
                let t = other_org(target_org)?;
                if t.kind != OrgKind::Corporation {
                    return Err(GameError::InvalidOrder("only corporations can be taxed".into()));
                }
                if !(1..=100).contains(rate_percent) {
                    return Err(GameError::InvalidOrder("rate_percent must be 1..=100".into()));
                }
            }
            Action::Breakup { target_org } => {
                let t = other_org(target_org)?;
                if t.kind != OrgKind::Corporation {
                    return Err(GameError::InvalidOrder(
                        "only corporations can be broken up".into(),
                    ));
                }
            }
            Action::Lobby { target_org, funds } => {
                other_org(target_org)?;
                positive("funds", *funds)?;
            }
            Action::Collaborate {
                partner_org,
                tech,
                talent,
            } => {
                other_org(partner_org)?;
                positive("talent", *talent)?;
                researchable(tech)?;
            }
            Action::SafetyInvestment { talent } => positive("talent", *talent)?,
            Action::FreeText { text } => {
                if text.trim().is_empty() || text.len() > MAX_FREE_TEXT_LEN {
                    return Err(GameError::InvalidOrder(format!(
                        "free text must be 1..={MAX_FREE_TEXT_LEN} bytes"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pending free-text orders that the facilitator has not ruled on yet.
    pub fn unruled_free_text(&self) -> Vec<OrderRef> {
        let mut out = Vec::new();
        for (role, pending) in &self.pending_orders {
            for tag in [PhaseTag::Private, PhaseTag::Public] {
                for (index, order) in pending.get(tag).iter().enumerate() {
                    if order.kind() != OrderKind::FreeText {
                        continue;
                    }
                    let r = OrderRef {
                        role: role.clone(),
                        phase_tag: tag,
                        index,
                    };
                    if !self.rulings.iter().any(|e| e.order == r) {
                        out.push(r);
                    }
                }
            }
        }
        out
    }

    pub fn pending_order(&self, r: &OrderRef) -> Option<&Order> {
        self.pending_orders.get(&r.role)?.get(r.phase_tag).get(r.index)
    }

    /// Moves to the next phase of the turn cycle. Leaving the public action
    /// phase resolves the turn and returns its report.
    pub fn advance_phase(&mut self) -> Result<Option<ResolutionReport>, GameError> {
        let next = match self.world.phase {
            Phase::Negotiation => Phase::PrivateActions,
            Phase::PrivateActions => Phase::PublicActions,
            Phase::PublicActions => {
                let unruled = self.unruled_free_text();
                if !unruled.is_empty() {
                    return Err(GameError::UnruledFreeText(unruled));
                }
                Phase::WorldUpdate
            }
            phase => return Err(GameError::WrongPhase { phase }),
        };
        self.change_phase(next);
        if next == Phase::WorldUpdate {
            return self.resolve_turn().map(Some);
        }
        Ok(None)
    }

    pub(crate) fn change_phase(&mut self, to: Phase) {
        let (turn, year) = if self.world.phase == Phase::WorldUpdate {
            (
                self.world.turn + 1,
                self.world.year + self.scenario.years_per_turn,
            )
        } else {
            (self.world.turn, self.world.year)
        };
        self.emit(
            Actor::World,
            Visibility::Public,
            EventPayload::PhaseChanged {
                from: self.world.phase,
                to,
                turn,
                year,
            },
        );
    }

    /// Binds mechanical effects to a free-text order. They take effect at the
    /// next resolution.
    pub fn facilitator_rule(
        &mut self,
        caller: &Caller,
        order: &OrderRef,
        ruling: Ruling,
    ) -> Result<u64, GameError> {
        if caller != &Caller::Facilitator {
            return Err(GameError::NotFacilitator);
        }
        if self.is_over() {
            return Err(GameError::WrongPhase {
                phase: self.world.phase,
            });
        }
        match self.pending_order(order) {
            Some(o) if o.kind() == OrderKind::FreeText => {}
            _ => return Err(GameError::UnknownOrder(order.clone())),
        }
        if self.rulings.iter().any(|e| &e.order == order) {
            return Err(GameError::AlreadyRuled(order.clone()));
        }
        for d in &ruling.deltas {
            let org = match d {
                RulingDelta::Funds { org, .. }
                | RulingDelta::Talent { org, .. }
                | RulingDelta::Influence { org, .. }
                | RulingDelta::TalentAttraction { org, .. }
                | RulingDelta::GrantTech { org, .. } => Some(org),
                RulingDelta::Chaos { .. } => None,
            };
            if let Some(org) = org {
                if !self.world.orgs.contains_key(org) {
                    return Err(GameError::UnknownTarget(org.to_string()));
                }
            }
            if let RulingDelta::GrantTech { tech, .. } = d {
                if self.scenario.tech(tech).is_none() {
                    return Err(GameError::UnknownTarget(tech.to_string()));
                }
            }
        }
        let org = self.org_of(&order.role)?.clone();
        Ok(self.emit(
            Actor::Facilitator,
            Visibility::for_tag(order.phase_tag, &org),
            EventPayload::FreeTextRuled {
                order: order.clone(),
                ruling,
            },
        ))
    }

    /// Queues a world event for the next resolution's bulletin.
    pub fn inject_world_event(
        &mut self,
        caller: &Caller,
        event: WorldEventSpec,
    ) -> Result<u64, GameError> {
        if caller != &Caller::Facilitator {
            return Err(GameError::NotFacilitator);
        }
        if self.is_over() {
            return Err(GameError::WrongPhase {
                phase: self.world.phase,
            });
        }
        for eff in &event.effects {
            let world_target = eff.target == EffectTarget::WorldChaos;
            if world_target != (eff.scope == EffectScope::World) {
                return Err(GameError::InvalidOrder(
                    "chaos effects take the world scope and only they do".into(),
                ));
            }
            match &eff.scope {
                EffectScope::Owner => {
                    return Err(GameError::InvalidOrder(
                        "world events have no owner; name an organization".into(),
                    ))
                }
                EffectScope::Org(o) if !self.world.orgs.contains_key(o) => {
                    return Err(GameError::UnknownTarget(o.to_string()))
                }
                _ => {}
            }
        }
        Ok(self.emit(
            Actor::Facilitator,
            Visibility::FacilitatorOnly,
            EventPayload::WorldEventQueued { event },
        ))
    }
}
