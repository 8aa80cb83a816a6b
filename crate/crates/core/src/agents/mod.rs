//! Scripted players and the batch harness.
//!
//! A policy sees exactly what a human in the same seat would: the role's
//! [`FilteredView`] plus the public scenario content. Its randomness comes
//! from a stream keyed by game seed, turn, phase and role, so a batch is
//! reproducible game by game.

mod batch;
mod policies;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::FilteredView;
use crate::model::{Action, Order, OrderKind, Phase, PhaseTag, ProductCard, Scenario, TechNode};
use crate::ids::{OrgId, TechId};

pub use batch::{
    play_game, run_batch, run_batch_with, Aggregate, BatchError, BatchResult, Execution,
    GameRecord, PolicyAssignment,
};
pub use policies::{
    policy_by_name, policy_catalog, AggressiveDefector, GreedyTech, RandomLegal,
    SafetyCooperator,
};

/// Chance per turn that a policy swaps one order for a tail action.
pub const TAIL_PROBABILITY: f64 = 0.1;

pub type AgentRng = ChaCha8Rng;

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Order kinds this policy treats as its own unlikely moves.
    fn tail_kinds(&self) -> &'static [OrderKind];

    /// Orders for the current action phase. Must stay within `ctx`'s budget.
    fn orders(&self, ctx: &mut Ctx<'_>, rng: &mut AgentRng) -> Vec<Order>;
}

/// Orders chosen for one phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub orders: Vec<Order>,
    pub tail_substituted: bool,
}

/// Runs `policy` for the role behind `view`.
///
/// The tail coin is flipped once per turn, in the private action phase. On
/// heads the last order (if any) is replaced by a legal move drawn from the
/// policy's tail kinds; if no tail move is legal the orders stand.
pub fn decide(
    policy: &dyn Policy,
    view: &FilteredView,
    scenario: &Scenario,
    rng: &mut AgentRng,
) -> Decision {
    let Some(mut ctx) = Ctx::new(view, scenario) else {
        return Decision {
            orders: Vec::new(),
            tail_substituted: false,
        };
    };
    let coin = view.phase == Phase::PrivateActions && rng.random_bool(TAIL_PROBABILITY);
    let mut orders = policy.orders(&mut ctx, rng);
    if !coin {
        return Decision {
            orders,
            tail_substituted: false,
        };
    }
    let removed = orders.pop();
    let mut ctx = Ctx::new(view, scenario).expect("action phase");
    for o in &orders {
        ctx.spend(&o.action);
    }
    let mut kinds: Vec<OrderKind> = policy
        .tail_kinds()
        .iter()
        .copied()
        .filter(|k| ctx.may(*k))
        .collect();
    // Shuffle so that an illegal first pick falls back to the others.
    for i in (1..kinds.len()).rev() {
        kinds.swap(i, rng.random_range(0..=i));
    }
    for kind in kinds {
        if let Some(action) = ctx.random_action(kind, rng) {
            orders.push(ctx.order(action));
            return Decision {
                orders,
                tail_substituted: true,
            };
        }
    }
    orders.extend(removed);
    Decision {
        orders,
        tail_substituted: false,
    }
}

/// A policy's working knowledge for one decision: the view, the scenario and
/// what is left of the organization's budget.
pub struct Ctx<'a> {
    pub view: &'a FilteredView,
    pub scenario: &'a Scenario,
    pub tag: PhaseTag,
    pub talent: i64,
    pub funds: i64,
}

impl<'a> Ctx<'a> {
    /// `None` outside the two action phases.
    pub fn new(view: &'a FilteredView, scenario: &'a Scenario) -> Option<Self> {
        let tag = view.phase.order_tag()?;
        let mut talent = view.own.talent_pool;
        let mut funds = view.own.funds.max(0);
        for (role, pending) in &view.team_orders {
            for o in pending.iter() {
                if role == &view.role && o.phase_tag == tag {
                    continue;
                }
                talent -= o.action.talent_committed();
                funds -= o.action.funds_committed();
            }
        }
        Some(Self {
            view,
            scenario,
            tag,
            talent: talent.max(0),
            funds: funds.max(0),
        })
    }

    pub fn may(&self, kind: OrderKind) -> bool {
        self.view.entitlements.contains(&kind)
    }

    pub fn order(&self, action: Action) -> Order {
        Order::new(self.view.role.clone(), self.tag, action)
    }

    pub fn spend(&mut self, action: &Action) {
        self.talent -= action.talent_committed();
        self.funds -= action.funds_committed();
    }

    /// Records `action` against the budget and wraps it as an order.
    pub fn take(&mut self, action: Action) -> Order {
        self.spend(&action);
        self.order(action)
    }

    pub fn org(&self) -> &OrgId {
        &self.view.org
    }

    pub fn other_orgs(&self) -> impl Iterator<Item = &crate::engine::OrgSummary> {
        self.view.others.iter()
    }

    fn research_cost(&self, t: &TechNode) -> i64 {
        let discounted = self
            .view
            .published
            .get(&t.id)
            .is_some_and(|by| by.iter().any(|o| o != self.org()));
        if discounted {
            (t.research_cost - t.publish_discount).max(1)
        } else {
            t.research_cost
        }
    }

    /// Techs the organization may research now, with remaining successes
    /// needed, cheapest first.
    pub fn researchable(&self) -> Vec<(&'a TechNode, i64)> {
        let own = &self.view.own;
        let mut out: Vec<_> = self
            .scenario
            .tech_tree
            .iter()
            .filter(|t| !own.unlocked_techs.contains(&t.id))
            .filter(|t| t.prerequisites.iter().all(|p| own.unlocked_techs.contains(p)))
            .map(|t| {
                let done = own.research_progress.get(&t.id).copied().unwrap_or(0);
                (t, (self.research_cost(t) - done).max(1))
            })
            .collect();
        out.sort_by(|a, b| (a.1, &a.0.id).cmp(&(b.1, &b.0.id)));
        out
    }

    /// Products the organization may develop now, with remaining successes
    /// needed, cheapest first.
    pub fn developable(&self) -> Vec<(&'a ProductCard, i64)> {
        let own = &self.view.own;
        let mut out: Vec<_> = self
            .scenario
            .product_deck
            .iter()
            .filter(|p| !own.developed_products.contains(&p.id))
            .filter(|p| own.unlocked_techs.contains(&p.required_tech))
            .map(|p| {
                let done = own.development_progress.get(&p.id).copied().unwrap_or(0);
                (p, (p.dev_cost - done).max(1))
            })
            .collect();
        out.sort_by(|a, b| (a.1, &a.0.id).cmp(&(b.1, &b.0.id)));
        out
    }

    /// Developed products not yet deployed.
    pub fn deployable(&self) -> Vec<&'a ProductCard> {
        let own = &self.view.own;
        self.scenario
            .product_deck
            .iter()
            .filter(|p| own.developed_products.contains(&p.id) && !own.deployed_products.contains(&p.id))
            .collect()
    }

    pub fn deployed(&self) -> Vec<&'a ProductCard> {
        let own = &self.view.own;
        self.scenario
            .product_deck
            .iter()
            .filter(|p| own.deployed_products.contains(&p.id))
            .collect()
    }

    /// Unlocked techs this organization has not published.
    pub fn unpublished(&self) -> Vec<TechId> {
        self.view
            .own
            .unlocked_techs
            .iter()
            .filter(|t| !self.view.published.get(*t).is_some_and(|by| by.contains(self.org())))
            .cloned()
            .collect()
    }

    fn pick<'b, T>(items: &'b [T], rng: &mut AgentRng) -> Option<&'b T> {
        if items.is_empty() {
            None
        } else {
            items.get(rng.random_range(0..items.len()))
        }
    }

    fn some_talent(&self, rng: &mut AgentRng) -> Option<i64> {
        (self.talent >= 1).then(|| rng.random_range(1..=self.talent))
    }

    /// A random legal action of `kind` within budget, if one exists.
    /// Free text is never generated.
    pub fn random_action(&self, kind: OrderKind, rng: &mut AgentRng) -> Option<Action> {
        if !self.may(kind) {
            return None;
        }
        let others: Vec<&crate::engine::OrgSummary> = self.other_orgs().collect();
        let corps: Vec<&crate::engine::OrgSummary> = others
            .iter()
            .copied()
            .filter(|o| o.kind == crate::model::OrgKind::Corporation)
            .collect();
        let action = match kind {
            OrderKind::AllocateResearch => {
                let techs = self.researchable();
                let (t, _) = Self::pick(&techs, rng)?;
                Action::AllocateResearch {
                    tech: t.id.clone(),
                    talent: self.some_talent(rng)?,
                    visibility: self.tag,
                }
            }
            OrderKind::AllocateDevelopment => {
                let products = self.developable();
                let (p, _) = Self::pick(&products, rng)?;
                Action::AllocateDevelopment {
                    product: p.id.clone(),
                    talent: self.some_talent(rng)?,
                    visibility: self.tag,
                }
            }
            OrderKind::DeployProduct => Action::DeployProduct {
                product: Self::pick(&self.deployable(), rng)?.id.clone(),
            },
            OrderKind::WithdrawProduct => Action::WithdrawProduct {
                product: Self::pick(&self.deployed(), rng)?.id.clone(),
            },
            OrderKind::Publish => Action::Publish {
                tech: Self::pick(&self.unpublished(), rng)?.clone(),
            },
            OrderKind::Espionage => Action::Espionage {
                target_org: Self::pick(&others, rng)?.id.clone(),
                talent: self.some_talent(rng)?,
            },
            OrderKind::PoachTalent => {
                let cost = self.scenario.market.poach_cost_per_talent;
                if self.funds < cost {
                    return None;
                }
                let amount = rng.random_range(1..=(self.funds / cost).min(4));
                Action::PoachTalent {
                    target_org: Self::pick(&others, rng)?.id.clone(),
                    amount,
                    funds_offered: amount * cost,
                }
            }
            OrderKind::Regulate => Action::Regulate {
                category: *Self::pick(&crate::model::ProductCategory::ALL, rng)?,
            },
            OrderKind::Tax => Action::Tax {
                target_org: Self::pick(&corps, rng)?.id.clone(),
                rate_percent: rng.random_range(1..=50),
            },
            OrderKind::Breakup => Action::Breakup {
                target_org: Self::pick(&corps, rng)?.id.clone(),
            },
            OrderKind::Lobby => {
                if self.funds < 1 {
                    return None;
                }
                Action::Lobby {
                    target_org: Self::pick(&others, rng)?.id.clone(),
                    funds: rng.random_range(1..=self.funds.min(6)),
                }
            }
            OrderKind::Collaborate => {
                let techs = self.researchable();
                let (t, _) = Self::pick(&techs, rng)?;
                Action::Collaborate {
                    partner_org: Self::pick(&others, rng)?.id.clone(),
                    tech: t.id.clone(),
                    talent: self.some_talent(rng)?,
                }
            }
            OrderKind::SafetyInvestment => Action::SafetyInvestment {
                talent: self.some_talent(rng)?,
            },
            OrderKind::FreeText => return None,
        };
        Some(action)
    }
}
