//! The fold: how each event changes the game state.
//!
//! `apply` never consults the RNG or the clock. It rejects events that would
//! break a state invariant, which is how replay detects logs that parse but
//! could not have come from a real game.

use crate::error::GameError;
use crate::ids::OrgId;
use crate::model::{
    EventPayload, GameEvent, OrganizationState, Phase, ProjectKind, ProjectRecord, TechNode,
};

use super::{GameState, RulingEntry};

fn corrupt(event: &GameEvent, why: impl std::fmt::Display) -> GameError {
    GameError::CorruptLog(format!("event {} ({}): {why}", event.seq, event.kind()))
}

fn org_mut<'a>(
    state: &'a mut GameState,
    event: &GameEvent,
    org: &OrgId,
) -> Result<&'a mut OrganizationState, GameError> {
    state
        .world
        .orgs
        .get_mut(org)
        .ok_or_else(|| corrupt(event, format!("unknown org {org}")))
}

pub(crate) fn apply(state: &mut GameState, event: &GameEvent) -> Result<(), GameError> {
    let turn = state.world.turn;
    match &event.body {
        EventPayload::GameCreated { .. } => {
            return Err(corrupt(event, "GameCreated may only open the log"));
        }
        EventPayload::PhaseChanged {
            from,
            to,
            turn: new_turn,
            year,
        } => {
            if *from != state.world.phase {
                return Err(corrupt(event, format!("phase is {}", state.world.phase)));
            }
            let expected_turn = if *from == Phase::WorldUpdate {
                state.world.turn + 1
            } else {
                state.world.turn
            };
            let expected_year =
                state.scenario.start_year + expected_turn * state.scenario.years_per_turn;
            if *new_turn != expected_turn || *year != expected_year {
                return Err(corrupt(event, "clock does not advance by one turn"));
            }
            if *from == Phase::WorldUpdate {
                state.pending_orders.clear();
                state.rulings.clear();
                state.queued_events.clear();
            }
            state.world.phase = *to;
            state.world.turn = *new_turn;
            state.world.year = *year;
        }
        EventPayload::MessageSent { .. } => {}
        EventPayload::OrdersSubmitted {
            role,
            phase_tag,
            orders,
        } => {
            if state.scenario.role(role).is_none() {
                return Err(corrupt(event, format!("unknown role {role}")));
            }
            state
                .pending_orders
                .entry(role.clone())
                .or_default()
                .set(*phase_tag, orders.clone());
            state
                .rulings
                .retain(|r| !(&r.order.role == role && r.order.phase_tag == *phase_tag));
        }
        EventPayload::FreeTextRuled { order, ruling } => {
            state.rulings.push(RulingEntry {
                order: order.clone(),
                ruling: ruling.clone(),
            });
        }
        EventPayload::WorldEventQueued { event: spec } => {
            state.queued_events.push(spec.clone());
        }
        EventPayload::ProjectStarted {
            org,
            project,
            target,
            visibility,
        } => {
            let o = org_mut(state, event, org)?;
            let key = ProjectRecord::key(*project, target);
            let rec = o.projects.entry(key).or_insert_with(|| ProjectRecord {
                kind: *project,
                target: target.clone(),
                visibility: *visibility,
                started_turn: turn,
                progress: 0,
                completed_turn: None,
            });
            rec.visibility = rec.visibility.max(*visibility);
        }
        EventPayload::ResearchRolled {
            org,
            tech,
            stream,
            dice,
            successes,
            ..
        } => {
            let o = org_mut(state, event, org)?;
            let total = {
                let p = o.research_progress.entry(tech.clone()).or_insert(0);
                *p += successes;
                *p
            };
            if let Some(rec) = o
                .projects
                .get_mut(&ProjectRecord::key(ProjectKind::Research, tech.as_str()))
            {
                rec.progress = total;
            }
            state.rng_cursor.insert(stream.clone(), dice.len() as u64);
        }
        EventPayload::DevelopmentRolled {
            org,
            product,
            stream,
            dice,
            successes,
        } => {
            let o = org_mut(state, event, org)?;
            let total = {
                let p = o.development_progress.entry(product.clone()).or_insert(0);
                *p += successes;
                *p
            };
            if let Some(rec) = o
                .projects
                .get_mut(&ProjectRecord::key(ProjectKind::Development, product.as_str()))
            {
                rec.progress = total;
            }
            state.rng_cursor.insert(stream.clone(), dice.len() as u64);
        }
        EventPayload::TechUnlocked { org, tech, .. } => {
            let node: TechNode = state
                .scenario
                .tech(tech)
                .cloned()
                .ok_or_else(|| corrupt(event, format!("unknown tech {tech}")))?;
            let o = org_mut(state, event, org)?;
            if let Some(p) = node
                .prerequisites
                .iter()
                .find(|p| !o.unlocked_techs.contains(*p))
            {
                return Err(corrupt(event, format!("prerequisite {p} not unlocked")));
            }
            o.unlocked_techs.insert(tech.clone());
            if let Some(rec) = o
                .projects
                .get_mut(&ProjectRecord::key(ProjectKind::Research, tech.as_str()))
            {
                rec.completed_turn.get_or_insert(turn);
            }
        }
        EventPayload::ProductDeveloped { org, product } => {
            let o = org_mut(state, event, org)?;
            o.developed_products.insert(product.clone());
            if let Some(rec) = o
                .projects
                .get_mut(&ProjectRecord::key(ProjectKind::Development, product.as_str()))
            {
                rec.completed_turn.get_or_insert(turn);
            }
        }
        EventPayload::ProductDeployed { org, product } => {
            let o = org_mut(state, event, org)?;
            if !o.developed_products.contains(product) {
                return Err(corrupt(event, format!("{product} was never developed")));
            }
            o.deployed_products.insert(product.clone());
        }
        EventPayload::ProductWithdrawn { org, product } => {
            let o = org_mut(state, event, org)?;
            o.deployed_products.remove(product);
        }
        EventPayload::TechPublished { org, tech, .. } => {
            let o = org_mut(state, event, org)?;
            if !o.unlocked_techs.contains(tech) {
                return Err(corrupt(event, format!("{tech} published before unlock")));
            }
            if let Some(rec) = o
                .projects
                .get_mut(&ProjectRecord::key(ProjectKind::Research, tech.as_str()))
            {
                rec.visibility = crate::model::PhaseTag::Public;
            }
            state
                .world
                .published
                .entry(tech.clone())
                .or_default()
                .insert(org.clone());
        }
        EventPayload::EspionageRolled { stream, dice, .. } => {
            state.rng_cursor.insert(stream.clone(), dice.len() as u64);
        }
        EventPayload::EspionageFinding { .. } | EventPayload::EspionageExposed { .. } => {}
        EventPayload::TalentMoved {
            from, to, amount, ..
        } => {
            if *amount < 0 {
                return Err(corrupt(event, "negative transfer"));
            }
            let available = match from {
                None => state.world.free_talent,
                Some(o) => org_mut(state, event, o)?.talent_pool,
            };
            if available < *amount {
                return Err(corrupt(event, "transfer exceeds source pool"));
            }
            match from {
                None => state.world.free_talent -= amount,
                Some(o) => org_mut(state, event, o)?.talent_pool -= amount,
            }
            match to {
                None => state.world.free_talent += amount,
                Some(o) => org_mut(state, event, o)?.talent_pool += amount,
            }
        }
        EventPayload::TalentAdjusted { org, delta, .. } => {
            let o = org_mut(state, event, org)?;
            if o.talent_pool + delta < 0 {
                return Err(corrupt(event, "talent pool would go negative"));
            }
            o.talent_pool += delta;
        }
        EventPayload::FundsChanged { org, delta, .. } => {
            org_mut(state, event, org)?.funds += delta;
        }
        EventPayload::InfluenceChanged { org, delta, .. } => {
            org_mut(state, event, org)?.influence += delta;
        }
        EventPayload::AttractionChanged { org, delta, .. } => {
            org_mut(state, event, org)?.talent_attraction += delta;
        }
        EventPayload::ChaosChanged { from, to, .. } => {
            if *from != state.world.chaos {
                return Err(corrupt(event, format!("chaos is {}", state.world.chaos)));
            }
            if !(0..=100).contains(to) {
                return Err(corrupt(event, "chaos outside 0..=100"));
            }
            state.world.chaos = *to;
        }
        EventPayload::ChaosBreakdown { .. }
        | EventPayload::WorldEventTriggered { .. }
        | EventPayload::TurnResolved { .. } => {}
        EventPayload::Bulletin { text } => {
            if event.visibility == crate::model::Visibility::Public {
                state.world.narrative.push(text.clone());
            }
        }
        EventPayload::GameFinished {} => {
            if state.world.phase != Phase::Debrief {
                return Err(corrupt(event, "game finished outside debrief"));
            }
            state.world.phase = Phase::Finished;
        }
    }
    Ok(())
}
