//! Structural checks over scenario content.
//!
//! [`validate_scenario`] is exhaustive: it reports every violation it finds
//! rather than stopping at the first one. Violations are data, not errors.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::ids::{OrgId, TechId, RESERVED_IDS};
use crate::model::{EffectScope, EffectTarget, OrderKind, OrgKind, ParameterEffect, Scenario};

pub const TURN_RANGE: (i64, i64) = (4, 8);
pub const START_YEAR_RANGE: (i64, i64) = (2020, 2028);
pub const SPAN_RANGE: (i64, i64) = (4, 16);
pub const CHAOS_RANGE: (i64, i64) = (0, 100);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule")]
pub enum Violation {
    OutOfRange {
        entity: String,
        field: String,
        value: i64,
        expected: String,
    },
    DuplicateId {
        collection: String,
        id: String,
    },
    ReservedId {
        entity: String,
    },
    DanglingReference {
        entity: String,
        reference: String,
    },
    CyclicTechTree {
        techs: Vec<TechId>,
    },
    TierOrder {
        tech: TechId,
        tier: i64,
        prerequisite: TechId,
        prerequisite_tier: i64,
    },
    OrganizationWithoutRole {
        org: OrgId,
    },
    GovernmentOnlyEntitlement {
        role: String,
        kind: OrderKind,
    },
    InvalidEffectScope {
        entity: String,
        target: EffectTarget,
        scope: String,
    },
    InvalidGoalWeight {
        role: String,
    },
}

impl Violation {
    /// The scenario entity the violation is about.
    pub fn entity(&self) -> String {
        match self {
            Violation::OutOfRange { entity, .. }
            | Violation::ReservedId { entity }
            | Violation::DanglingReference { entity, .. }
            | Violation::InvalidEffectScope { entity, .. } => entity.clone(),
            Violation::DuplicateId { collection, id } => format!("{collection}:{id}"),
            Violation::CyclicTechTree { techs } => techs
                .iter()
                .map(|t| format!("tech:{t}"))
                .collect::<Vec<_>>()
                .join(","),
            Violation::TierOrder { tech, .. } => format!("tech:{tech}"),
            Violation::OrganizationWithoutRole { org } => format!("org:{org}"),
            Violation::GovernmentOnlyEntitlement { role, .. }
            | Violation::InvalidGoalWeight { role } => format!("role:{role}"),
        }
    }

    /// Short stable name of the broken rule.
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::OutOfRange { .. } => "OutOfRange",
            Violation::DuplicateId { .. } => "DuplicateId",
            Violation::ReservedId { .. } => "ReservedId",
            Violation::DanglingReference { .. } => "DanglingReference",
            Violation::CyclicTechTree { .. } => "CyclicTechTree",
            Violation::TierOrder { .. } => "TierOrder",
            Violation::OrganizationWithoutRole { .. } => "OrganizationWithoutRole",
            Violation::GovernmentOnlyEntitlement { .. } => "GovernmentOnlyEntitlement",
            Violation::InvalidEffectScope { .. } => "InvalidEffectScope",
            Violation::InvalidGoalWeight { .. } => "InvalidGoalWeight",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange {
                entity,
                field,
                value,
                expected,
            } => write!(f, "{entity}: {field} = {value}, expected {expected}"),
            Violation::DuplicateId { collection, id } => {
                write!(f, "duplicate id '{id}' in {collection}")
            }
            Violation::ReservedId { entity } => {
                write!(f, "{entity}: id is reserved ({})", RESERVED_IDS.join(", "))
            }
            Violation::DanglingReference { entity, reference } => {
                write!(f, "{entity} references unknown id '{reference}'")
            }
            Violation::CyclicTechTree { techs } => {
                let names: Vec<&str> = techs.iter().map(TechId::as_str).collect();
                write!(f, "prerequisite cycle among techs: {}", names.join(" -> "))
            }
            Violation::TierOrder {
                tech,
                tier,
                prerequisite,
                prerequisite_tier,
            } => write!(
                f,
                "tech '{tech}' (tier {tier}) must sit right of prerequisite '{prerequisite}' (tier {prerequisite_tier})"
            ),
            Violation::OrganizationWithoutRole { org } => {
                write!(f, "organization '{org}' has no roles")
            }
            Violation::GovernmentOnlyEntitlement { role, kind } => {
                write!(f, "corporate role '{role}' holds government-only order {kind}")
            }
            Violation::InvalidEffectScope {
                entity,
                target,
                scope,
            } => write!(f, "{entity}: effect on {target:?} cannot use scope '{scope}'"),
            Violation::InvalidGoalWeight { role } => {
                write!(f, "role '{role}' has a non-finite goal weight")
            }
        }
    }
}

fn range(out: &mut Vec<Violation>, entity: &str, field: &str, value: i64, lo: i64, hi: i64) {
    if value < lo || value > hi {
        out.push(Violation::OutOfRange {
            entity: entity.to_owned(),
            field: field.to_owned(),
            value,
            expected: format!("{lo}..={hi}"),
        });
    }
}

fn at_least(out: &mut Vec<Violation>, entity: &str, field: &str, value: i64, lo: i64) {
    if value < lo {
        out.push(Violation::OutOfRange {
            entity: entity.to_owned(),
            field: field.to_owned(),
            value,
            expected: format!(">= {lo}"),
        });
    }
}

fn duplicates<'a>(
    out: &mut Vec<Violation>,
    collection: &str,
    ids: impl IntoIterator<Item = &'a str>,
) {
    let mut seen = HashSet::new();
    let mut reported = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) && reported.insert(id) {
            out.push(Violation::DuplicateId {
                collection: collection.to_owned(),
                id: id.to_owned(),
            });
        }
    }
}

fn check_effect(
    out: &mut Vec<Violation>,
    entity: &str,
    effect: &ParameterEffect,
    orgs: &BTreeSet<&str>,
    owner_allowed: bool,
) {
    let scope_ok = match (&effect.scope, effect.target) {
        (EffectScope::World, EffectTarget::WorldChaos) => true,
        (EffectScope::World, _) | (_, EffectTarget::WorldChaos) => false,
        (EffectScope::Owner, _) => owner_allowed,
        (EffectScope::Org(org), _) => {
            if !orgs.contains(org.as_str()) {
                out.push(Violation::DanglingReference {
                    entity: entity.to_owned(),
                    reference: org.to_string(),
                });
            }
            true
        }
    };
    if !scope_ok {
        out.push(Violation::InvalidEffectScope {
            entity: entity.to_owned(),
            target: effect.target,
            scope: String::from(effect.scope.clone()),
        });
    }
}

/// Returns every invariant violation in `s`; empty iff the scenario is playable.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let scen = format!("scenario:{}", s.id);

    range(&mut out, &scen, "num_turns", s.num_turns, TURN_RANGE.0, TURN_RANGE.1);
    range(&mut out, &scen, "years_per_turn", s.years_per_turn, 1, 2);
    range(
        &mut out,
        &scen,
        "start_year",
        s.start_year,
        START_YEAR_RANGE.0,
        START_YEAR_RANGE.1,
    );
    range(
        &mut out,
        &scen,
        "chaos_rules.initial",
        s.chaos_rules.initial,
        CHAOS_RANGE.0,
        CHAOS_RANGE.1,
    );
    at_least(
        &mut out,
        &scen,
        "market.initial_free_talent",
        s.market.initial_free_talent,
        0,
    );
    at_least(
        &mut out,
        &scen,
        "market.poach_cost_per_talent",
        s.market.poach_cost_per_talent,
        1,
    );
    at_least(
        &mut out,
        &scen,
        "market.lobby_funds_per_influence",
        s.market.lobby_funds_per_influence,
        1,
    );
    range(&mut out, &scen, "dice.sides", i64::from(s.dice.sides), 1, 255);
    range(
        &mut out,
        &scen,
        "dice.success_threshold",
        i64::from(s.dice.success_threshold),
        1,
        i64::from(s.dice.sides),
    );

    duplicates(&mut out, "tech_tree", s.tech_tree.iter().map(|t| t.id.as_str()));
    duplicates(&mut out, "product_deck", s.product_deck.iter().map(|p| p.id.as_str()));
    duplicates(&mut out, "organizations", s.organizations.iter().map(|o| o.id.as_str()));
    duplicates(&mut out, "roles", s.roles.iter().map(|r| r.id.as_str()));
    duplicates(&mut out, "event_table", s.event_table.iter().map(|e| e.id.as_str()));

    let org_ids: BTreeSet<&str> = s.organizations.iter().map(|o| o.id.as_str()).collect();
    let tiers: BTreeMap<&str, i64> = s.tech_tree.iter().map(|t| (t.id.as_str(), t.tier)).collect();

    // Techs and the prerequisite graph.
    for t in &s.tech_tree {
        let e = format!("tech:{}", t.id);
        at_least(&mut out, &e, "tier", t.tier, 0);
        at_least(&mut out, &e, "research_cost", t.research_cost, 1);
        at_least(&mut out, &e, "publish_discount", t.publish_discount, 0);
        for p in &t.prerequisites {
            if !tiers.contains_key(p.as_str()) {
                out.push(Violation::DanglingReference {
                    entity: e.clone(),
                    reference: p.to_string(),
                });
            }
        }
    }
    let (cycles, cyclic_edge) = prerequisite_cycles(s);
    for techs in cycles {
        out.push(Violation::CyclicTechTree { techs });
    }
    for t in &s.tech_tree {
        for p in &t.prerequisites {
            let Some(&pt) = tiers.get(p.as_str()) else {
                continue;
            };
            if cyclic_edge(&t.id, p) {
                continue;
            }
            if t.tier <= pt {
                out.push(Violation::TierOrder {
                    tech: t.id.clone(),
                    tier: t.tier,
                    prerequisite: p.clone(),
                    prerequisite_tier: pt,
                });
            }
        }
    }

    for p in &s.product_deck {
        let e = format!("product:{}", p.id);
        if !tiers.contains_key(p.required_tech.as_str()) {
            out.push(Violation::DanglingReference {
                entity: e.clone(),
                reference: p.required_tech.to_string(),
            });
        }
        at_least(&mut out, &e, "dev_cost", p.dev_cost, 1);
        for eff in &p.effects {
            check_effect(&mut out, &e, eff, &org_ids, true);
        }
    }

    for o in &s.organizations {
        let e = format!("org:{}", o.id);
        if RESERVED_IDS.contains(&o.id.as_str()) {
            out.push(Violation::ReservedId { entity: e.clone() });
        }
        at_least(&mut out, &e, "initial_talent", o.initial_talent, 0);
        at_least(&mut out, &e, "initial_funds", o.initial_funds, 0);
        if !s.roles.iter().any(|r| r.organization == o.id) {
            out.push(Violation::OrganizationWithoutRole { org: o.id.clone() });
        }
    }

    for r in &s.roles {
        let e = format!("role:{}", r.id);
        if RESERVED_IDS.contains(&r.id.as_str()) {
            out.push(Violation::ReservedId { entity: e.clone() });
        }
        match s.organization(&r.organization) {
            None => out.push(Violation::DanglingReference {
                entity: e.clone(),
                reference: r.organization.to_string(),
            }),
            Some(org) if org.kind == OrgKind::Corporation => {
                let gov_only: BTreeSet<OrderKind> = r
                    .entitlements
                    .iter()
                    .copied()
                    .filter(|k| k.government_only())
                    .collect();
                for kind in gov_only {
                    out.push(Violation::GovernmentOnlyEntitlement {
                        role: r.id.to_string(),
                        kind,
                    });
                }
            }
            Some(_) => {}
        }
        if r.goal.iter().any(|g| !g.weight.is_finite()) {
            out.push(Violation::InvalidGoalWeight {
                role: r.id.to_string(),
            });
        }
    }

    for ev in &s.event_table {
        let e = format!("event:{}", ev.id);
        if let Some(th) = ev.threshold {
            range(&mut out, &e, "threshold", th, 1, CHAOS_RANGE.1);
        }
        for eff in &ev.effects {
            check_effect(&mut out, &e, eff, &org_ids, false);
        }
    }

    out
}

type CycleEdge = Box<dyn Fn(&TechId, &TechId) -> bool>;

/// Strongly connected components of the prerequisite graph that form cycles,
/// plus a predicate telling whether an edge lies inside one of them.
fn prerequisite_cycles(s: &Scenario) -> (Vec<Vec<TechId>>, CycleEdge) {
    let mut graph: DiGraph<TechId, ()> = DiGraph::new();
    let mut index: BTreeMap<TechId, NodeIndex> = BTreeMap::new();
    for t in &s.tech_tree {
        index
            .entry(t.id.clone())
            .or_insert_with(|| graph.add_node(t.id.clone()));
    }
    for t in &s.tech_tree {
        for p in &t.prerequisites {
            if let (Some(&from), Some(&to)) = (index.get(p), index.get(&t.id)) {
                graph.add_edge(from, to, ());
            }
        }
    }

    let mut cycles = Vec::new();
    let mut component: BTreeMap<TechId, usize> = BTreeMap::new();
    for (i, scc) in tarjan_scc(&graph).into_iter().enumerate() {
        let self_loop = scc.len() == 1 && graph.contains_edge(scc[0], scc[0]);
        if scc.len() > 1 || self_loop {
            let mut techs: Vec<TechId> = scc.iter().map(|n| graph[*n].clone()).collect();
            techs.sort();
            for t in &techs {
                component.insert(t.clone(), i);
            }
            cycles.push(techs);
        }
    }
    cycles.sort();
    let pred = move |a: &TechId, b: &TechId| match (component.get(a), component.get(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };
    (cycles, Box::new(pred))
}

/// Prerequisites-first ordering of the tech tree, or `None` if it has a cycle.
pub fn topological_order(s: &Scenario) -> Option<Vec<TechId>> {
    let mut graph: DiGraph<TechId, ()> = DiGraph::new();
    let mut index: BTreeMap<TechId, NodeIndex> = BTreeMap::new();
    for t in &s.tech_tree {
        index
            .entry(t.id.clone())
            .or_insert_with(|| graph.add_node(t.id.clone()));
    }
    for t in &s.tech_tree {
        for p in &t.prerequisites {
            graph.add_edge(*index.get(p)?, index[&t.id], ());
        }
    }
    toposort(&graph, None)
        .ok()
        .map(|order| order.into_iter().map(|n| graph[n].clone()).collect())
}
