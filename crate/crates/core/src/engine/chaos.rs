//! World chaos dynamics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{ChaosRules, ProductCard, ProductCategory};

/// Chaos-relevant actions taken during one turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnActions {
    pub exposed_espionage: i64,
    pub breakups: i64,
    /// Total talent committed to safety investments.
    pub safety_talent: i64,
    /// Direct deltas from world-scoped product effects.
    pub direct: i64,
}

impl TurnActions {
    pub fn delta(&self, rules: &ChaosRules) -> i64 {
        self.exposed_espionage * rules.exposed_espionage_delta
            + self.breakups * rules.breakup_delta
            + self.safety_talent * rules.safety_delta_per_talent
            + self.direct
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaosUpdate {
    pub before: i64,
    pub after: i64,
    pub product_delta: i64,
    pub action_delta: i64,
    pub facilitator_delta: i64,
    /// Thresholds crossed upward this update, ascending.
    pub crossed: Vec<i64>,
}

/// Externality a deployed product contributes this turn. Regulation suppresses
/// positive externalities of its category.
pub fn product_externality(card: &ProductCard, regulated: &BTreeSet<ProductCategory>) -> i64 {
    if regulated.contains(&card.category) {
        card.chaos_externality.min(0)
    } else {
        card.chaos_externality
    }
}

/// New chaos value: the old value plus product externalities, action deltas
/// and facilitator deltas, clamped to `0..=100`.
pub fn update_chaos(
    chaos: i64,
    deployed: &[&ProductCard],
    regulated: &BTreeSet<ProductCategory>,
    actions: &TurnActions,
    facilitator_delta: i64,
    rules: &ChaosRules,
    thresholds: &[i64],
) -> ChaosUpdate {
    let product_delta: i64 = deployed
        .iter()
        .map(|c| product_externality(c, regulated))
        .sum();
    let action_delta = actions.delta(rules);
    let after = (chaos + product_delta + action_delta + facilitator_delta).clamp(0, 100);
    let mut crossed: Vec<i64> = thresholds
        .iter()
        .copied()
        .filter(|&t| chaos < t && after >= t)
        .collect();
    crossed.sort_unstable();
    crossed.dedup();
    ChaosUpdate {
        before: chaos,
        after,
        product_delta,
        action_delta,
        facilitator_delta,
        crossed,
    }
}
