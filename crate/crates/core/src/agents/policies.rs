use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{Action, OrderKind, OrgKind, Order, PhaseTag, ProductCategory};

use super::{AgentRng, Ctx, Policy};

/// Random legal moves: up to three orders per phase, any entitled kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomLegal;

/// Pours every free talent into the cheapest tech it can research, then
/// deploys whatever it has developed.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyTech;

/// Splits talent between safety and open research, publishes everything,
/// collaborates with a fixed partner, regulates the worst category and only
/// deploys harmless products.
#[derive(Debug, Clone, Copy, Default)]
pub struct SafetyCooperator;

/// Spies, poaches, develops for revenue, deploys everything and never
/// publishes.
#[derive(Debug, Clone, Copy, Default)]
pub struct AggressiveDefector;

pub fn policy_catalog() -> Vec<Box<dyn Policy>> {
    vec![
        Box::new(RandomLegal),
        Box::new(GreedyTech),
        Box::new(SafetyCooperator),
        Box::new(AggressiveDefector),
    ]
}

pub fn policy_by_name(name: &str) -> Option<Box<dyn Policy>> {
    policy_catalog().into_iter().find(|p| p.name() == name)
}

impl Policy for RandomLegal {
    fn name(&self) -> &'static str {
        "random_legal"
    }

    fn tail_kinds(&self) -> &'static [OrderKind] {
        &[OrderKind::Breakup, OrderKind::Espionage, OrderKind::WithdrawProduct]
    }

    fn orders(&self, ctx: &mut Ctx<'_>, rng: &mut AgentRng) -> Vec<Order> {
        let kinds: Vec<OrderKind> = ctx
            .view
            .entitlements
            .iter()
            .copied()
            .filter(|k| *k != OrderKind::FreeText)
            .collect();
        let mut out = Vec::new();
        if kinds.is_empty() {
            return out;
        }
        for _ in 0..rng.random_range(0..=3) {
            let kind = kinds[rng.random_range(0..kinds.len())];
            if let Some(a) = ctx.random_action(kind, rng) {
                out.push(ctx.take(a));
            }
        }
        out
    }
}

fn deploy_all(ctx: &mut Ctx<'_>, keep: impl Fn(&crate::model::ProductCard) -> bool) -> Vec<Order> {
    if !ctx.may(OrderKind::DeployProduct) {
        return Vec::new();
    }
    ctx.deployable()
        .into_iter()
        .filter(|p| keep(p))
        .map(|p| {
            ctx.take(Action::DeployProduct {
                product: p.id.clone(),
            })
        })
        .collect()
}

impl Policy for GreedyTech {
    fn name(&self) -> &'static str {
        "greedy_tech"
    }

    fn tail_kinds(&self) -> &'static [OrderKind] {
        &[OrderKind::Espionage, OrderKind::PoachTalent]
    }

    fn orders(&self, ctx: &mut Ctx<'_>, _rng: &mut AgentRng) -> Vec<Order> {
        if ctx.tag == PhaseTag::Public {
            return deploy_all(ctx, |_| true);
        }
        let talent = ctx.talent;
        if talent < 1 {
            return Vec::new();
        }
        if ctx.may(OrderKind::AllocateResearch) {
            if let Some((t, _)) = ctx.researchable().first() {
                return vec![ctx.take(Action::AllocateResearch {
                    tech: t.id.clone(),
                    talent,
                    visibility: PhaseTag::Private,
                })];
            }
        }
        if ctx.may(OrderKind::AllocateDevelopment) {
            if let Some((p, _)) = ctx.developable().first() {
                return vec![ctx.take(Action::AllocateDevelopment {
                    product: p.id.clone(),
                    talent,
                    visibility: PhaseTag::Private,
                })];
            }
        }
        Vec::new()
    }
}

impl SafetyCooperator {
    /// Organizations pair up in id order: first with second, third with fourth.
    fn partner(ctx: &Ctx<'_>) -> Option<crate::ids::OrgId> {
        let mut ids: Vec<_> = ctx.other_orgs().map(|o| o.id.clone()).collect();
        ids.push(ctx.org().clone());
        ids.sort();
        let i = ids.iter().position(|o| o == ctx.org())?;
        ids.get(i ^ 1).cloned()
    }

    /// Category whose deployed products (anyone's) add the most chaos.
    fn worst_category(ctx: &Ctx<'_>) -> Option<ProductCategory> {
        let mut harm: BTreeMap<ProductCategory, i64> = BTreeMap::new();
        let deployed = ctx
            .other_orgs()
            .flat_map(|o| o.deployed_products.iter())
            .chain(ctx.view.own.deployed_products.iter());
        for id in deployed {
            if let Some(card) = ctx.scenario.product(id) {
                if card.chaos_externality > 0 {
                    *harm.entry(card.category).or_default() += card.chaos_externality;
                }
            }
        }
        harm.into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
    }
}

impl Policy for SafetyCooperator {
    fn name(&self) -> &'static str {
        "safety_cooperator"
    }

    fn tail_kinds(&self) -> &'static [OrderKind] {
        &[OrderKind::Espionage, OrderKind::DeployProduct]
    }

    fn orders(&self, ctx: &mut Ctx<'_>, _rng: &mut AgentRng) -> Vec<Order> {
        let mut out = Vec::new();
        if ctx.tag == PhaseTag::Private {
            return out;
        }
        if ctx.may(OrderKind::Publish) {
            for tech in ctx.unpublished() {
                out.push(ctx.take(Action::Publish { tech }));
            }
        }
        if ctx.may(OrderKind::WithdrawProduct) {
            for p in ctx.deployed() {
                if p.chaos_externality > 0 {
                    out.push(ctx.take(Action::WithdrawProduct {
                        product: p.id.clone(),
                    }));
                }
            }
        }
        out.extend(deploy_all(ctx, |p| p.chaos_externality <= 0));
        if ctx.may(OrderKind::Regulate) {
            if let Some(category) = Self::worst_category(ctx) {
                out.push(ctx.take(Action::Regulate { category }));
            }
        }

        let talent = ctx.talent;
        if talent < 1 {
            return out;
        }
        let mut safety = if ctx.may(OrderKind::SafetyInvestment) {
            (talent + 1) / 2
        } else {
            0
        };
        let rest = talent - safety;
        let mut placed = false;
        if rest >= 1 {
            let cheapest = ctx.researchable().first().map(|(t, _)| t.id.clone());
            let partner = Self::partner(ctx);
            match (cheapest, partner) {
                (Some(tech), Some(partner_org)) if ctx.may(OrderKind::Collaborate) => {
                    out.push(ctx.take(Action::Collaborate {
                        partner_org,
                        tech,
                        talent: rest,
                    }));
                    placed = true;
                }
                (Some(tech), _) if ctx.may(OrderKind::AllocateResearch) => {
                    out.push(ctx.take(Action::AllocateResearch {
                        tech,
                        talent: rest,
                        visibility: PhaseTag::Public,
                    }));
                    placed = true;
                }
                _ => {}
            }
            if !placed && ctx.may(OrderKind::AllocateDevelopment) {
                let harmless = ctx
                    .developable()
                    .into_iter()
                    .find(|(p, _)| p.chaos_externality <= 0)
                    .map(|(p, _)| p.id.clone());
                if let Some(product) = harmless {
                    out.push(ctx.take(Action::AllocateDevelopment {
                        product,
                        talent: rest,
                        visibility: PhaseTag::Public,
                    }));
                    placed = true;
                }
            }
        }
        if !placed && ctx.may(OrderKind::SafetyInvestment) {
            safety = talent;
        }
        if safety >= 1 {
            out.push(ctx.take(Action::SafetyInvestment { talent: safety }));
        }
        out
    }
}

impl Policy for AggressiveDefector {
    fn name(&self) -> &'static str {
        "aggressive_defector"
    }

    fn tail_kinds(&self) -> &'static [OrderKind] {
        &[OrderKind::SafetyInvestment, OrderKind::Lobby]
    }

    fn orders(&self, ctx: &mut Ctx<'_>, rng: &mut AgentRng) -> Vec<Order> {
        let mut out = Vec::new();
        if ctx.tag == PhaseTag::Public {
            out.extend(deploy_all(ctx, |_| true));
            return out;
        }

        let others: Vec<_> = ctx.other_orgs().cloned().collect();
        if ctx.may(OrderKind::Espionage) && ctx.talent >= 2 && !others.is_empty() {
            let target = others[rng.random_range(0..others.len())].id.clone();
            out.push(ctx.take(Action::Espionage {
                target_org: target,
                talent: 1,
            }));
        }
        let cost = ctx.scenario.market.poach_cost_per_talent;
        if ctx.may(OrderKind::PoachTalent) && ctx.funds >= cost {
            let richest = others
                .iter()
                .filter(|o| o.talent_pool > 0)
                .max_by(|a, b| a.talent_pool.cmp(&b.talent_pool).then(b.id.cmp(&a.id)));
            if let Some(target) = richest {
                let amount = (ctx.funds / cost).min(3);
                out.push(ctx.take(Action::PoachTalent {
                    target_org: target.id.clone(),
                    amount,
                    funds_offered: amount * cost,
                }));
            }
        }
        let corps: Vec<_> = others.iter().filter(|o| o.kind == OrgKind::Corporation).collect();
        if ctx.may(OrderKind::Breakup) && rng.random_bool(0.5) {
            if let Some(t) = corps.iter().max_by(|a, b| a.talent_pool.cmp(&b.talent_pool).then(b.id.cmp(&a.id))) {
                out.push(ctx.take(Action::Breakup {
                    target_org: t.id.clone(),
                }));
            }
        }
        if ctx.may(OrderKind::Tax) {
            if let Some(t) = corps.iter().max_by(|a, b| a.funds.cmp(&b.funds).then(b.id.cmp(&a.id))) {
                out.push(ctx.take(Action::Tax {
                    target_org: t.id.clone(),
                    rate_percent: 25,
                }));
            }
        }

        let talent = ctx.talent;
        if talent < 1 {
            return out;
        }
        let lucrative = ctx
            .developable()
            .into_iter()
            .max_by(|a, b| {
                (a.0.revenue, a.0.chaos_externality)
                    .cmp(&(b.0.revenue, b.0.chaos_externality))
                    .then(b.0.id.cmp(&a.0.id))
            })
            .map(|(p, _)| p.id.clone());
        let research = ctx.researchable().first().map(|(t, _)| t.id.clone());
        let dev_talent = match (&lucrative, &research) {
            (Some(_), Some(_)) if ctx.may(OrderKind::AllocateResearch) => (talent + 1) / 2,
            (Some(_), _) => talent,
            (None, _) => 0,
        };
        if let Some(product) = lucrative.filter(|_| dev_talent >= 1 && ctx.may(OrderKind::AllocateDevelopment)) {
            out.push(ctx.take(Action::AllocateDevelopment {
                product,
                talent: dev_talent,
                visibility: PhaseTag::Private,
            }));
        }
        let left = ctx.talent;
        if let Some(tech) = research.filter(|_| left >= 1 && ctx.may(OrderKind::AllocateResearch)) {
            out.push(ctx.take(Action::AllocateResearch {
                tech,
                talent: left,
                visibility: PhaseTag::Private,
            }));
        }
        out
    }
}
