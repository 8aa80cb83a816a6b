//! Random valid scenarios, for property tests and stress runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    ChaosRules, DiceRule, EffectScope, EffectTarget, GoalMetric, GoalTerm, MarketRules, OrderKind,
    OrgKind, OrganizationSpec, ParameterEffect, ProductCard, ProductCategory, RoleSheet, Scenario,
    TechNode, WorldEventSpec,
};

const METRICS: [GoalMetric; 4] = [
    GoalMetric::OwnFunds,
    GoalMetric::OwnTechCount,
    GoalMetric::Stability,
    GoalMetric::Influence,
];

/// A scenario drawn at random from `seed`. Always passes validation.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;

    let mut organizations = Vec::new();
    for i in 0..rng.random_range(2..=5) {
        let kind = if i == 0 || rng.random_bool(0.4) {
            OrgKind::Government
        } else {
            OrgKind::Corporation
        };
        organizations.push(OrganizationSpec {
            id: format!("org{i}").into(),
            name: format!("Organization {i}"),
            kind,
            initial_talent: rng.random_range(0..=12),
            initial_funds: rng.random_range(0..=25),
            initial_influence: rng.random_range(0..=3),
            initial_talent_attraction: rng.random_range(0..=2),
        });
    }

    let mut roles = Vec::new();
    for org in &organizations {
        for j in 0..rng.random_range(1..=3) {
            let entitlements: Vec<OrderKind> = OrderKind::ALL
                .iter()
                .copied()
                .filter(|k| org.kind == OrgKind::Government || !k.government_only())
                .filter(|_| rng.random_bool(0.7))
                .collect();
            let goal = (0..rng.random_range(1..=3))
                .map(|_| GoalTerm {
                    metric: *METRICS.choose(rng).expect("non-empty"),
                    weight: f64::from(rng.random_range(0..=8u32)) / 2.0,
                })
                .collect();
            roles.push(RoleSheet {
                id: format!("{}_r{j}", org.id).into(),
                title: format!("Role {j} of {}", org.name),
                organization: org.id.clone(),
                entitlements,
                goal,
                briefing: "Generated role.".into(),
            });
        }
    }

    let mut tech_tree: Vec<TechNode> = Vec::new();
    let tiers = rng.random_range(1..=4);
    for tier in 0..tiers {
        let lower: Vec<_> = tech_tree.iter().map(|t| t.id.clone()).collect();
        for k in 0..rng.random_range(1..=4) {
            let mut prerequisites = Vec::new();
            if tier > 0 {
                for _ in 0..rng.random_range(1..=2) {
                    let p = lower.choose(rng).expect("lower tiers are non-empty").clone();
                    if !prerequisites.contains(&p) {
                        prerequisites.push(p);
                    }
                }
            }
            let research_cost = rng.random_range(1..=3 + 2 * tier);
            tech_tree.push(TechNode {
                id: format!("t{tier}_{k}").into(),
                name: format!("Tech {tier}.{k}"),
                tier,
                prerequisites,
                research_cost,
                publish_discount: rng.random_range(0..research_cost),
                description: String::new(),
            });
        }
    }

    let org_effect = |rng: &mut ChaCha8Rng, scope: EffectScope| {
        let target = *[
            EffectTarget::OrgFunds,
            EffectTarget::OrgInfluence,
            EffectTarget::OrgTalentAttraction,
        ]
        .choose(rng)
        .expect("non-empty");
        ParameterEffect {
            target,
            delta: rng.random_range(-3..=3),
            scope,
        }
    };

    let mut product_deck = Vec::new();
    for i in 0..rng.random_range(1..=10) {
        let mut effects = Vec::new();
        if rng.random_bool(0.6) {
            effects.push(org_effect(rng, EffectScope::Owner));
        }
        if rng.random_bool(0.2) {
            effects.push(ParameterEffect::chaos(rng.random_range(-2..=3)));
        }
        product_deck.push(ProductCard {
            id: format!("p{i}").into(),
            name: format!("Product {i}"),
            required_tech: tech_tree.choose(rng).expect("non-empty").id.clone(),
            dev_cost: rng.random_range(1..=4),
            effects,
            chaos_externality: rng.random_range(-3..=5),
            revenue: rng.random_range(0..=6),
            category: *ProductCategory::ALL.choose(rng).expect("non-empty"),
            description: String::new(),
        });
    }

    let mut event_table = Vec::new();
    for (i, threshold) in [30, 50, 70, 90].into_iter().enumerate() {
        if !rng.random_bool(0.6) {
            continue;
        }
        let mut effects = Vec::new();
        for org in &organizations {
            if rng.random_bool(0.5) {
                effects.push(org_effect(rng, EffectScope::Org(org.id.clone())));
            }
        }
        if rng.random_bool(0.3) {
            effects.push(ParameterEffect::chaos(rng.random_range(-5..=5)));
        }
        event_table.push(WorldEventSpec {
            id: format!("e{i}").into(),
            name: format!("Event at {threshold}"),
            threshold: Some(threshold),
            narrative: format!("Chaos passes {threshold}."),
            effects,
        });
    }

    let sides = rng.random_range(4..=10u8);
    Scenario {
        id: format!("random-{seed}"),
        title: format!("Random scenario {seed}"),
        start_year: rng.random_range(2020..=2028),
        years_per_turn: rng.random_range(1..=2),
        num_turns: rng.random_range(4..=8),
        tech_tree,
        product_deck,
        organizations,
        roles,
        chaos_rules: ChaosRules {
            initial: rng.random_range(0..=80),
            exposed_espionage_delta: rng.random_range(0..=4),
            breakup_delta: rng.random_range(0..=3),
            safety_delta_per_talent: -rng.random_range(0..=2),
        },
        market: MarketRules {
            initial_free_talent: rng.random_range(0..=15),
            poach_cost_per_talent: rng.random_range(1..=4),
            lobby_funds_per_influence: rng.random_range(1..=4),
            regulate_influence: rng.random_range(0..=2),
        },
        event_table,
        dice: DiceRule {
            sides,
            success_threshold: rng.random_range(1..=sides),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_scenario;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn generated_scenarios_validate(seed in any::<u64>()) {
            let s = random_scenario(seed);
            prop_assert_eq!(validate_scenario(&s), vec![]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(random_scenario(9), random_scenario(9));
        assert_ne!(random_scenario(9), random_scenario(10));
    }
}
