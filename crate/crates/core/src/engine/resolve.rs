//! Turn resolution.
//!
//! Orders resolve simultaneously, in a fixed order of sub-steps:
//!
//! 0. facilitator rulings and injected world events
//! 1. publications, then research, collaboration and development rolls
//! 2. espionage contests
//! 3. talent market: breakups, poaching, attraction
//! 4. economy: withdrawals, deployments, regulation, revenue, taxes, lobbying
//! 5. chaos update
//! 6. world events for chaos thresholds crossed in step 5
//! 7. bulletin and clock
//!
//! Within a step, organizations are visited in id order and orders in their
//! canonical (derived `Ord`) order. Dice come from streams keyed by
//! `(turn, step, actor, subject)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::GameError;
use crate::ids::{OrgId, ProductId, TechId};
use crate::model::{
    Action, Actor, EffectScope, EffectTarget, EventPayload, GameEvent, Order, ParameterEffect,
    Phase, PhaseTag, ProductCard, ProductCategory, ProjectKind, RulingDelta, UnlockSource,
    Visibility,
};
use crate::rng::{roll, stream, StreamKey};

use super::chaos::{update_chaos, ChaosUpdate, TurnActions};
use super::GameState;

/// What a world update tells the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// The turn that was resolved.
    pub turn: i64,
    pub public_bulletin: Vec<String>,
    pub public_events: Vec<GameEvent>,
    /// Each organization's own private outcomes, espionage findings included.
    pub private_reports: BTreeMap<OrgId, Vec<GameEvent>>,
}

impl ResolutionReport {
    fn from_events(turn: i64, events: &[GameEvent]) -> Self {
        let mut public_bulletin = Vec::new();
        let mut public_events = Vec::new();
        let mut private_reports: BTreeMap<OrgId, Vec<GameEvent>> = BTreeMap::new();
        for e in events {
            match &e.visibility {
                Visibility::Public => {
                    if let EventPayload::Bulletin { text } = &e.body {
                        public_bulletin.push(text.clone());
                    }
                    public_events.push(e.clone());
                }
                Visibility::Org { org } => {
                    private_reports.entry(org.clone()).or_default().push(e.clone())
                }
                Visibility::Roles { .. } | Visibility::FacilitatorOnly => {}
            }
        }
        Self {
            turn,
            public_bulletin,
            public_events,
            private_reports,
        }
    }
}

type Issued = (OrgId, Order);

/// Talent and visibility merged across the orders that feed one project.
#[derive(Debug, Clone, Copy)]
struct Allocation {
    talent: i64,
    visibility: PhaseTag,
}

impl Allocation {
    fn merge(slot: &mut Option<Allocation>, talent: i64, visibility: PhaseTag) {
        match slot {
            Some(a) => {
                a.talent += talent;
                a.visibility = a.visibility.max(visibility);
            }
            None => *slot = Some(Allocation { talent, visibility }),
        }
    }
}

fn merge_into<K: Ord>(map: &mut BTreeMap<K, Allocation>, key: K, talent: i64, vis: PhaseTag) {
    let mut slot = map.remove(&key);
    Allocation::merge(&mut slot, talent, vis);
    map.insert(key, slot.expect("merged"));
}

impl GameState {
    /// Resolves the current turn. Runs automatically when the public action
    /// phase is advanced.
    pub fn resolve_turn(&mut self) -> Result<ResolutionReport, GameError> {
        if self.world.phase != Phase::WorldUpdate {
            return Err(GameError::WrongPhase {
                phase: self.world.phase,
            });
        }
        let unruled = self.unruled_free_text();
        if !unruled.is_empty() {
            return Err(GameError::UnruledFreeText(unruled));
        }
        let first_new = self.event_log.len();
        let turn = self.world.turn;

        let mut orders: Vec<Issued> = Vec::new();
        for (role, pending) in &self.pending_orders {
            let org = self.org_of(role)?.clone();
            orders.extend(pending.iter().map(|o| (org.clone(), o.clone())));
        }
        orders.sort();

        let mut actions = TurnActions::default();
        let facilitator_chaos = self.resolve_facilitator();
        self.resolve_publications(&orders);
        self.resolve_research(&orders);
        self.resolve_development(&orders);
        self.resolve_espionage(&orders, &mut actions);
        self.resolve_talent_market(&orders, &mut actions);
        let regulated = self.resolve_economy(&orders, &mut actions);
        let update = self.resolve_chaos(&regulated, &actions, facilitator_chaos);
        self.resolve_threshold_events(&update);
        self.close_turn();

        Ok(ResolutionReport::from_events(
            turn,
            &self.event_log[first_new..],
        ))
    }

    fn org_name(&self, org: &OrgId) -> String {
        self.scenario
            .organization(org)
            .map_or_else(|| org.to_string(), |o| o.name.clone())
    }

    fn bulletin(&mut self, actor: Actor, visibility: Visibility, text: String) {
        self.emit(actor, visibility, EventPayload::Bulletin { text });
    }

    /// Emits the events for a list of parameter effects and returns the summed
    /// chaos delta, which the caller folds into the chaos update.
    fn apply_effects(
        &mut self,
        effects: &[ParameterEffect],
        owner: Option<&OrgId>,
        actor: &Actor,
        visibility: &Visibility,
        reason: &str,
    ) -> i64 {
        let mut chaos = 0;
        for eff in effects {
            let org = match (&eff.scope, eff.target) {
                (_, EffectTarget::WorldChaos) => {
                    chaos += eff.delta;
                    continue;
                }
                (EffectScope::Owner, _) => match owner {
                    Some(o) => o.clone(),
                    None => continue,
                },
                (EffectScope::Org(o), _) => o.clone(),
                (EffectScope::World, _) => continue,
            };
            if eff.delta == 0 || !self.world.orgs.contains_key(&org) {
                continue;
            }
            let (org, delta, reason) = (org, eff.delta, reason.to_owned());
            let body = match eff.target {
                EffectTarget::OrgFunds => EventPayload::FundsChanged { org, delta, reason },
                EffectTarget::OrgInfluence => EventPayload::InfluenceChanged { org, delta, reason },
                EffectTarget::OrgTalentAttraction => {
                    EventPayload::AttractionChanged { org, delta, reason }
                }
                EffectTarget::WorldChaos => unreachable!(),
            };
            self.emit(actor.clone(), visibility.clone(), body);
        }
        chaos
    }

    pub(crate) fn effective_research_cost(&self, org: &OrgId, tech: &TechId) -> i64 {
        let node = self.scenario.tech(tech).expect("validated tech");
        let published_by_other = self
            .world
            .published
            .get(tech)
            .is_some_and(|by| by.iter().any(|o| o != org));
        if published_by_other {
            (node.research_cost - node.publish_discount).max(1)
        } else {
            node.research_cost
        }
    }

    fn can_research(&self, org: &OrgId, tech: &TechId) -> bool {
        let o = &self.world.orgs[org];
        let Some(node) = self.scenario.tech(tech) else {
            return false;
        };
        !o.unlocked_techs.contains(tech)
            && node.prerequisites.iter().all(|p| o.unlocked_techs.contains(p))
    }

    fn unlock(&mut self, org: &OrgId, tech: &TechId, vis: PhaseTag, source: UnlockSource) {
        self.emit(
            Actor::World,
            Visibility::for_tag(vis, org),
            EventPayload::TechUnlocked {
                org: org.clone(),
                tech: tech.clone(),
                source,
            },
        );
        if vis == PhaseTag::Public {
            let name = self.scenario.tech(tech).map_or_else(String::new, |t| t.name.clone());
            let text = format!("{} announces a breakthrough in {name}.", self.org_name(org));
            self.bulletin(Actor::World, Visibility::Public, text);
        }
    }

    fn start_project(&mut self, org: &OrgId, kind: ProjectKind, target: &str, vis: PhaseTag) {
        let key = crate::model::ProjectRecord::key(kind, target);
        let known = self.world.orgs[org]
            .projects
            .get(&key)
            .is_some_and(|p| p.visibility >= vis);
        if !known {
            self.emit(
                Actor::World,
                Visibility::for_tag(vis, org),
                EventPayload::ProjectStarted {
                    org: org.clone(),
                    project: kind,
                    target: target.to_owned(),
                    visibility: vis,
                },
            );
        }
    }

    // Step 0.
    fn resolve_facilitator(&mut self) -> i64 {
        let mut chaos = 0;
        let mut rulings = self.rulings.clone();
        rulings.sort_by(|a, b| a.order.cmp(&b.order));
        for entry in rulings {
            let org = self.org_of(&entry.order.role).expect("ruled role exists").clone();
            let vis = Visibility::for_tag(entry.order.phase_tag, &org);
            if !entry.ruling.narrative.is_empty() {
                self.bulletin(Actor::Facilitator, vis.clone(), entry.ruling.narrative.clone());
            }
            for delta in &entry.ruling.deltas {
                let reason = "ruling".to_owned();
                let body = match delta.clone() {
                    RulingDelta::Chaos { delta } => {
                        chaos += delta;
                        continue;
                    }
                    RulingDelta::Funds { org, delta } => {
                        EventPayload::FundsChanged { org, delta, reason }
                    }
                    RulingDelta::Influence { org, delta } => {
                        EventPayload::InfluenceChanged { org, delta, reason }
                    }
                    RulingDelta::TalentAttraction { org, delta } => {
                        EventPayload::AttractionChanged { org, delta, reason }
                    }
                    RulingDelta::Talent { org, delta } => {
                        let pool = self.world.orgs[&org].talent_pool;
                        let delta = delta.max(-pool);
                        if delta == 0 {
                            continue;
                        }
                        EventPayload::TalentAdjusted { org, delta, reason }
                    }
                    RulingDelta::GrantTech { org, tech } => {
                        if self.can_research(&org, &tech) {
                            self.emit(
                                Actor::Facilitator,
                                vis.clone(),
                                EventPayload::TechUnlocked {
                                    org,
                                    tech,
                                    source: UnlockSource::Grant,
                                },
                            );
                        }
                        continue;
                    }
                };
                self.emit(Actor::Facilitator, vis.clone(), body);
            }
        }

        let queued = self.queued_events.clone();
        for ev in queued {
            self.emit(
                Actor::Facilitator,
                Visibility::Public,
                EventPayload::WorldEventTriggered {
                    event: ev.id.clone(),
                    name: ev.name.clone(),
                    narrative: ev.narrative.clone(),
                },
            );
            if !ev.narrative.is_empty() {
                self.bulletin(Actor::Facilitator, Visibility::Public, ev.narrative.clone());
            }
            chaos += self.apply_effects(
                &ev.effects,
                None,
                &Actor::Facilitator,
                &Visibility::Public,
                ev.id.as_str(),
            );
        }
        chaos
    }

    // Step 1a.
    fn resolve_publications(&mut self, orders: &[Issued]) {
        let mut seen = BTreeSet::new();
        for (org, order) in orders {
            let Action::Publish { tech } = &order.action else {
                continue;
            };
            if !seen.insert((org.clone(), tech.clone())) {
                continue;
            }
            let project = self.world.orgs[org]
                .projects
                .get(&crate::model::ProjectRecord::key(ProjectKind::Research, tech.as_str()))
                .cloned();
            self.emit(
                Actor::Role(order.issuing_role.clone()),
                Visibility::Public,
                EventPayload::TechPublished {
                    org: org.clone(),
                    tech: tech.clone(),
                    project,
                },
            );
            let name = self.scenario.tech(tech).map_or_else(String::new, |t| t.name.clone());
            let text = format!("{} publishes its research on {name}.", self.org_name(org));
            self.bulletin(Actor::World, Visibility::Public, text);
        }
    }

    // Step 1b.
    fn resolve_research(&mut self, orders: &[Issued]) {
        let turn = self.world.turn;
        let dice_rule = self.scenario.dice;
        let mut solo: BTreeMap<(OrgId, TechId), Allocation> = BTreeMap::new();
        let mut offers: BTreeMap<(OrgId, OrgId, TechId), Allocation> = BTreeMap::new();
        for (org, order) in orders {
            match &order.action {
                Action::AllocateResearch {
                    tech,
                    talent,
                    visibility,
                } => merge_into(&mut solo, (org.clone(), tech.clone()), *talent, *visibility),
                Action::Collaborate {
                    partner_org,
                    tech,
                    talent,
                } => merge_into(
                    &mut offers,
                    (org.clone(), partner_org.clone(), tech.clone()),
                    *talent,
                    order.phase_tag,
                ),
                _ => {}
            }
        }

        // A collaboration happens only when both sides offer it on the same
        // tech; an unanswered offer is ordinary research.
        let mut joint: BTreeMap<(OrgId, OrgId, TechId), (Allocation, Allocation)> = BTreeMap::new();
        for ((org, partner, tech), alloc) in &offers {
            match offers.get(&(partner.clone(), org.clone(), tech.clone())) {
                Some(other) => {
                    if org < partner {
                        joint.insert((org.clone(), partner.clone(), tech.clone()), (*alloc, *other));
                    }
                }
                None => merge_into(
                    &mut solo,
                    (org.clone(), tech.clone()),
                    alloc.talent,
                    alloc.visibility,
                ),
            }
        }

        for ((org, tech), alloc) in solo {
            if !self.can_research(&org, &tech) {
                continue;
            }
            self.start_project(&org, ProjectKind::Research, tech.as_str(), alloc.visibility);
            let key = StreamKey::new(turn, "research", org.as_str(), tech.as_str());
            let dice = roll(&mut stream(self.rng_seed, key), dice_rule, alloc.talent);
            let successes = dice_rule.successes(&dice);
            self.emit(
                Actor::World,
                Visibility::for_tag(alloc.visibility, &org),
                EventPayload::ResearchRolled {
                    org: org.clone(),
                    tech: tech.clone(),
                    partner: None,
                    stream: key.label(),
                    dice,
                    successes,
                },
            );
            if self.world.orgs[&org].research_progress[&tech]
                >= self.effective_research_cost(&org, &tech)
            {
                self.unlock(&org, &tech, alloc.visibility, UnlockSource::Research);
            }
        }

        for ((a, b, tech), (alloc_a, alloc_b)) in joint {
            let pair = format!("{a}+{b}");
            let key = StreamKey::new(turn, "collaboration", &pair, tech.as_str());
            let dice = roll(
                &mut stream(self.rng_seed, key),
                dice_rule,
                alloc_a.talent + alloc_b.talent,
            );
            let successes = dice_rule.successes(&dice);
            for (org, partner, vis) in [
                (&a, &b, alloc_a.visibility),
                (&b, &a, alloc_b.visibility),
            ] {
                if !self.can_research(org, &tech) {
                    continue;
                }
                self.start_project(org, ProjectKind::Research, tech.as_str(), vis);
                self.emit(
                    Actor::World,
                    Visibility::for_tag(vis, org),
                    EventPayload::ResearchRolled {
                        org: org.clone(),
                        tech: tech.clone(),
                        partner: Some(partner.clone()),
                        stream: key.label(),
                        dice: dice.clone(),
                        successes,
                    },
                );
                if self.world.orgs[org].research_progress[&tech]
                    >= self.effective_research_cost(org, &tech)
                {
                    self.unlock(org, &tech, vis, UnlockSource::Collaboration);
                }
            }
        }
    }

    // Step 1c.
    fn resolve_development(&mut self, orders: &[Issued]) {
        let turn = self.world.turn;
        let dice_rule = self.scenario.dice;
        let mut dev: BTreeMap<(OrgId, ProductId), Allocation> = BTreeMap::new();
        for (org, order) in orders {
            if let Action::AllocateDevelopment {
                product,
                talent,
                visibility,
            } = &order.action
            {
                merge_into(&mut dev, (org.clone(), product.clone()), *talent, *visibility);
            }
        }
        for ((org, product), alloc) in dev {
            let Some(card) = self.scenario.product(&product).cloned() else {
                continue;
            };
            let o = &self.world.orgs[&org];
            if o.developed_products.contains(&product) || !o.unlocked_techs.contains(&card.required_tech) {
                continue;
            }
            self.start_project(&org, ProjectKind::Development, product.as_str(), alloc.visibility);
            let key = StreamKey::new(turn, "development", org.as_str(), product.as_str());
            let dice = roll(&mut stream(self.rng_seed, key), dice_rule, alloc.talent);
            let successes = dice_rule.successes(&dice);
            let vis = Visibility::for_tag(alloc.visibility, &org);
            self.emit(
                Actor::World,
                vis.clone(),
                EventPayload::DevelopmentRolled {
                    org: org.clone(),
                    product: product.clone(),
                    stream: key.label(),
                    dice,
                    successes,
                },
            );
            if self.world.orgs[&org].development_progress[&product] >= card.dev_cost {
                self.emit(
                    Actor::World,
                    vis,
                    EventPayload::ProductDeveloped {
                        org: org.clone(),
                        product: product.clone(),
                    },
                );
            }
        }
    }

    // Step 2.
    fn resolve_espionage(&mut self, orders: &[Issued], actions: &mut TurnActions) {
        let turn = self.world.turn;
        let dice_rule = self.scenario.dice;
        let mut ops: BTreeMap<(OrgId, OrgId), Allocation> = BTreeMap::new();
        for (org, order) in orders {
            if let Action::Espionage { target_org, talent } = &order.action {
                merge_into(&mut ops, (org.clone(), target_org.clone()), *talent, order.phase_tag);
            }
        }
        for ((attacker, target), alloc) in ops {
            let key = StreamKey::new(turn, "espionage", attacker.as_str(), target.as_str());
            let dice = roll(&mut stream(self.rng_seed, key), dice_rule, alloc.talent);
            let successes = dice_rule.successes(&dice);
            let exposed = !dice.is_empty() && dice.iter().all(|&d| d == 1);
            self.emit(
                Actor::World,
                Visibility::for_tag(alloc.visibility, &attacker),
                EventPayload::EspionageRolled {
                    attacker: attacker.clone(),
                    target: target.clone(),
                    stream: key.label(),
                    dice,
                    successes,
                    exposed,
                },
            );
            if successes >= 1 {
                let projects = self.world.orgs[&target].private_projects().cloned().collect();
                self.emit(
                    Actor::World,
                    Visibility::Org {
                        org: attacker.clone(),
                    },
                    EventPayload::EspionageFinding {
                        attacker: attacker.clone(),
                        target: target.clone(),
                        projects,
                    },
                );
            }
            if exposed {
                actions.exposed_espionage += 1;
                self.emit(
                    Actor::World,
                    Visibility::Public,
                    EventPayload::EspionageExposed {
                        attacker: attacker.clone(),
                        target: target.clone(),
                    },
                );
                let text = format!(
                    "{} was caught conducting espionage against {}.",
                    self.org_name(&attacker),
                    self.org_name(&target)
                );
                self.bulletin(Actor::World, Visibility::Public, text);
            }
        }
    }

    // Step 3.
    fn resolve_talent_market(&mut self, orders: &[Issued], actions: &mut TurnActions) {
        let mut broken_up = BTreeSet::new();
        for (org, order) in orders {
            let Action::Breakup { target_org } = &order.action else {
                continue;
            };
            if !broken_up.insert(target_org.clone()) {
                continue;
            }
            actions.breakups += 1;
            let vis = Visibility::for_tag(order.phase_tag, org);
            let amount = self.world.orgs[target_org].talent_pool / 2;
            if amount > 0 {
                self.emit(
                    Actor::Role(order.issuing_role.clone()),
                    vis.clone(),
                    EventPayload::TalentMoved {
                        from: Some(target_org.clone()),
                        to: None,
                        amount,
                        reason: "breakup".into(),
                    },
                );
            }
            if order.phase_tag == PhaseTag::Public {
                let text = format!(
                    "{} orders the breakup of {}.",
                    self.org_name(org),
                    self.org_name(target_org)
                );
                self.bulletin(Actor::World, Visibility::Public, text);
            }
        }

        let cost = self.scenario.market.poach_cost_per_talent;
        for (org, order) in orders {
            let Action::PoachTalent {
                target_org,
                amount,
                funds_offered,
            } = &order.action
            else {
                continue;
            };
            let cash = (*funds_offered).min(self.world.orgs[org].funds.max(0));
            let moved = (*amount)
                .min(cash / cost)
                .min(self.world.orgs[target_org].talent_pool);
            if moved <= 0 {
                continue;
            }
            let vis = Visibility::for_tag(order.phase_tag, org);
            let actor = Actor::Role(order.issuing_role.clone());
            self.emit(
                actor.clone(),
                vis.clone(),
                EventPayload::TalentMoved {
                    from: Some(target_org.clone()),
                    to: Some(org.clone()),
                    amount: moved,
                    reason: "poaching".into(),
                },
            );
            self.emit(
                actor,
                vis,
                EventPayload::FundsChanged {
                    org: org.clone(),
                    delta: -moved * cost,
                    reason: "poaching".into(),
                },
            );
        }

        let mut attractive: Vec<(i64, OrgId)> = self
            .world
            .orgs
            .values()
            .filter(|o| o.talent_attraction > 0)
            .map(|o| (-o.talent_attraction, o.id.clone()))
            .collect();
        attractive.sort();
        for (neg, org) in attractive {
            let amount = (-neg).min(self.world.free_talent);
            if amount <= 0 {
                break;
            }
            self.emit(
                Actor::World,
                Visibility::Public,
                EventPayload::TalentMoved {
                    from: None,
                    to: Some(org),
                    amount,
                    reason: "attraction".into(),
                },
            );
        }
    }

    // Step 4. Returns the categories regulated this turn.
    fn resolve_economy(
        &mut self,
        orders: &[Issued],
        actions: &mut TurnActions,
    ) -> BTreeSet<ProductCategory> {
        for (org, order) in orders {
            let Action::WithdrawProduct { product } = &order.action else {
                continue;
            };
            if self.world.orgs[org].deployed_products.contains(product) {
                self.emit(
                    Actor::Role(order.issuing_role.clone()),
                    Visibility::Public,
                    EventPayload::ProductWithdrawn {
                        org: org.clone(),
                        product: product.clone(),
                    },
                );
            }
        }

        for (org, order) in orders {
            let Action::DeployProduct { product } = &order.action else {
                continue;
            };
            let o = &self.world.orgs[org];
            if !o.developed_products.contains(product) || o.deployed_products.contains(product) {
                continue;
            }
            let card = self.scenario.product(product).cloned().expect("validated product");
            let actor = Actor::Role(order.issuing_role.clone());
            self.emit(
                actor.clone(),
                Visibility::Public,
                EventPayload::ProductDeployed {
                    org: org.clone(),
                    product: product.clone(),
                },
            );
            let text = format!("{} deploys {}.", self.org_name(org), card.name);
            self.bulletin(Actor::World, Visibility::Public, text);
            actions.direct +=
                self.apply_effects(&card.effects, Some(org), &actor, &Visibility::Public, product.as_str());
        }

        let influence = self.scenario.market.regulate_influence;
        let mut regulated = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for (org, order) in orders {
            let Action::Regulate { category } = &order.action else {
                continue;
            };
            regulated.insert(*category);
            if !seen.insert((org.clone(), *category)) {
                continue;
            }
            let vis = Visibility::for_tag(order.phase_tag, org);
            if influence != 0 {
                self.emit(
                    Actor::Role(order.issuing_role.clone()),
                    vis,
                    EventPayload::InfluenceChanged {
                        org: org.clone(),
                        delta: influence,
                        reason: "regulation".into(),
                    },
                );
            }
            if order.phase_tag == PhaseTag::Public {
                let text = format!("{} regulates {category} AI.", self.org_name(org));
                self.bulletin(Actor::World, Visibility::Public, text);
            }
        }

        let mut revenue: BTreeMap<OrgId, i64> = BTreeMap::new();
        let org_ids: Vec<OrgId> = self.world.orgs.keys().cloned().collect();
        for org in &org_ids {
            let total: i64 = self.world.orgs[org]
                .deployed_products
                .iter()
                .filter_map(|p| self.scenario.product(p))
                .map(|card| {
                    if regulated.contains(&card.category) {
                        card.revenue / 2
                    } else {
                        card.revenue
                    }
                })
                .sum();
            revenue.insert(org.clone(), total);
            if total != 0 {
                self.emit(
                    Actor::World,
                    Visibility::Public,
                    EventPayload::FundsChanged {
                        org: org.clone(),
                        delta: total,
                        reason: "revenue".into(),
                    },
                );
            }
        }

        for (org, order) in orders {
            let Action::Tax {
                target_org,
                rate_percent,
            } = &order.action
            else {
                continue;
            };
            let base = revenue.get(target_org).copied().unwrap_or(0).max(0);
            let amount = (base * rate_percent / 100).min(self.world.orgs[target_org].funds.max(0));
            if amount <= 0 {
                continue;
            }
            let vis = Visibility::for_tag(order.phase_tag, org);
            let actor = Actor::Role(order.issuing_role.clone());
            for (who, delta) in [(target_org, -amount), (org, amount)] {
                self.emit(
                    actor.clone(),
                    vis.clone(),
                    EventPayload::FundsChanged {
                        org: who.clone(),
                        delta,
                        reason: "tax".into(),
                    },
                );
            }
        }

        let per_influence = self.scenario.market.lobby_funds_per_influence;
        for (org, order) in orders {
            let Action::Lobby { target_org, funds } = &order.action else {
                continue;
            };
            let paid = (*funds).min(self.world.orgs[org].funds.max(0));
            if paid <= 0 {
                continue;
            }
            let vis = Visibility::for_tag(order.phase_tag, org);
            let actor = Actor::Role(order.issuing_role.clone());
            for (who, delta) in [(org, -paid), (target_org, paid)] {
                self.emit(
                    actor.clone(),
                    vis.clone(),
                    EventPayload::FundsChanged {
                        org: who.clone(),
                        delta,
                        reason: "lobbying".into(),
                    },
                );
            }
            let gained = paid / per_influence;
            if gained > 0 {
                self.emit(
                    actor,
                    vis,
                    EventPayload::InfluenceChanged {
                        org: org.clone(),
                        delta: gained,
                        reason: "lobbying".into(),
                    },
                );
            }
        }

        actions.safety_talent += orders
            .iter()
            .filter_map(|(_, o)| match o.action {
                Action::SafetyInvestment { talent } => Some(talent),
                _ => None,
            })
            .sum::<i64>();

        regulated
    }

    // Step 5.
    fn resolve_chaos(
        &mut self,
        regulated: &BTreeSet<ProductCategory>,
        actions: &TurnActions,
        facilitator_delta: i64,
    ) -> ChaosUpdate {
        let deployed: Vec<&ProductCard> = self
            .world
            .orgs
            .values()
            .flat_map(|o| o.deployed_products.iter())
            .filter_map(|p| self.scenario.product(p))
            .collect();
        let thresholds: Vec<i64> = self
            .scenario
            .event_table
            .iter()
            .filter_map(|e| e.threshold)
            .collect();
        let update = update_chaos(
            self.world.chaos,
            &deployed,
            regulated,
            actions,
            facilitator_delta,
            &self.scenario.chaos_rules,
            &thresholds,
        );
        self.emit(
            Actor::World,
            Visibility::FacilitatorOnly,
            EventPayload::ChaosBreakdown {
                products: update.product_delta,
                actions: update.action_delta,
                facilitator: update.facilitator_delta,
            },
        );
        self.emit(
            Actor::World,
            Visibility::Public,
            EventPayload::ChaosChanged {
                from: update.before,
                to: update.after,
                reason: "turn".into(),
            },
        );
        update
    }

    // Step 6.
    fn resolve_threshold_events(&mut self, update: &ChaosUpdate) {
        let mut triggered: Vec<_> = self
            .scenario
            .event_table
            .iter()
            .filter(|e| e.threshold.is_some_and(|t| update.crossed.contains(&t)))
            .cloned()
            .collect();
        triggered.sort_by(|a, b| (a.threshold, &a.id).cmp(&(b.threshold, &b.id)));
        for ev in triggered {
            self.emit(
                Actor::World,
                Visibility::Public,
                EventPayload::WorldEventTriggered {
                    event: ev.id.clone(),
                    name: ev.name.clone(),
                    narrative: ev.narrative.clone(),
                },
            );
            self.bulletin(Actor::World, Visibility::Public, ev.narrative.clone());
            let chaos = self.apply_effects(
                &ev.effects,
                None,
                &Actor::World,
                &Visibility::Public,
                ev.id.as_str(),
            );
            let from = self.world.chaos;
            let to = (from + chaos).clamp(0, 100);
            if to != from {
                self.emit(
                    Actor::World,
                    Visibility::Public,
                    EventPayload::ChaosChanged {
                        from,
                        to,
                        reason: ev.id.to_string(),
                    },
                );
            }
        }
    }

    // Step 7.
    fn close_turn(&mut self) {
        let turn = self.world.turn;
        let next_year = self.world.year + self.scenario.years_per_turn;
        let deployed: usize = self.world.orgs.values().map(|o| o.deployed_products.len()).sum();
        let text = format!(
            "{next_year} State of the World: world chaos stands at {}/100; {deployed} AI product(s) are deployed.",
            self.world.chaos
        );
        self.bulletin(Actor::World, Visibility::Public, text);
        self.emit(Actor::World, Visibility::Public, EventPayload::TurnResolved { turn });
        let next = if turn + 1 >= self.scenario.num_turns {
            Phase::Debrief
        } else {
            Phase::Negotiation
        };
        self.change_phase(next);
    }
}
