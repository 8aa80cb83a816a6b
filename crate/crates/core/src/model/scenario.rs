use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{OrgId, ProductId, RoleId, TechId, WorldEventId};
use crate::model::order::OrderKind;

/// Static game content: everything a game needs before the first turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub start_year: i64,
    pub years_per_turn: i64,
    pub num_turns: i64,
    pub tech_tree: Vec<TechNode>,
    pub product_deck: Vec<ProductCard>,
    pub organizations: Vec<OrganizationSpec>,
    pub roles: Vec<RoleSheet>,
    pub chaos_rules: ChaosRules,
    #[serde(default)]
    pub market: MarketRules,
    pub event_table: Vec<WorldEventSpec>,
    #[serde(default)]
    pub dice: DiceRule,
}

impl Scenario {
    pub fn tech(&self, id: &TechId) -> Option<&TechNode> {
        self.tech_tree.iter().find(|t| &t.id == id)
    }

    pub fn product(&self, id: &ProductId) -> Option<&ProductCard> {
        self.product_deck.iter().find(|p| &p.id == id)
    }

    pub fn organization(&self, id: &OrgId) -> Option<&OrganizationSpec> {
        self.organizations.iter().find(|o| &o.id == id)
    }

    pub fn role(&self, id: &RoleId) -> Option<&RoleSheet> {
        self.roles.iter().find(|r| &r.id == id)
    }

    pub fn roles_of<'a>(&'a self, org: &'a OrgId) -> impl Iterator<Item = &'a RoleSheet> + 'a {
        self.roles.iter().filter(move |r| &r.organization == org)
    }

    pub fn end_year(&self) -> i64 {
        self.start_year + self.num_turns * self.years_per_turn
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechNode {
    pub id: TechId,
    pub name: String,
    /// Column in the left-to-right tree layout.
    pub tier: i64,
    pub prerequisites: Vec<TechId>,
    /// Accumulated dice successes required to unlock.
    pub research_cost: i64,
    /// Cost reduction once another organization has published this tech.
    pub publish_discount: i64,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductCategory {
    Health,
    Finance,
    Education,
    Defense,
    Cyber,
    Surveillance,
    Consumer,
}

impl ProductCategory {
    pub const ALL: [ProductCategory; 7] = [
        ProductCategory::Health,
        ProductCategory::Finance,
        ProductCategory::Education,
        ProductCategory::Defense,
        ProductCategory::Cyber,
        ProductCategory::Surveillance,
        ProductCategory::Consumer,
    ];
}

impl fmt::Display for ProductCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProductCategory::Health => "health",
            ProductCategory::Finance => "finance",
            ProductCategory::Education => "education",
            ProductCategory::Defense => "defense",
            ProductCategory::Cyber => "cyber",
            ProductCategory::Surveillance => "surveillance",
            ProductCategory::Consumer => "consumer",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductCard {
    pub id: ProductId,
    pub name: String,
    pub required_tech: TechId,
    /// Accumulated dice successes required to develop.
    pub dev_cost: i64,
    /// Applied once, when the product is deployed.
    pub effects: Vec<ParameterEffect>,
    /// Added to world chaos every turn while deployed.
    pub chaos_externality: i64,
    /// Funds earned every turn while deployed.
    pub revenue: i64,
    pub category: ProductCategory,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectTarget {
    OrgFunds,
    OrgTalentAttraction,
    WorldChaos,
    OrgInfluence,
}

/// Who a [`ParameterEffect`] applies to.
///
/// Serialized as a bare string: `"world"`, `"self"` (the organization that
/// triggered the effect, e.g. the deployer of a product) or an org id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum EffectScope {
    World,
    Owner,
    Org(OrgId),
}

impl From<String> for EffectScope {
    fn from(s: String) -> Self {
        match s.as_str() {
            "world" => EffectScope::World,
            "self" => EffectScope::Owner,
            _ => EffectScope::Org(OrgId::from(s)),
        }
    }
}

impl From<EffectScope> for String {
    fn from(s: EffectScope) -> Self {
        match s {
            EffectScope::World => "world".to_owned(),
            EffectScope::Owner => "self".to_owned(),
            EffectScope::Org(o) => o.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterEffect {
    pub target: EffectTarget,
    pub delta: i64,
    pub scope: EffectScope,
}

impl ParameterEffect {
    pub fn chaos(delta: i64) -> Self {
        Self {
            target: EffectTarget::WorldChaos,
            delta,
            scope: EffectScope::World,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgKind {
    Government,
    Corporation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrganizationSpec {
    pub id: OrgId,
    pub name: String,
    pub kind: OrgKind,
    pub initial_talent: i64,
    pub initial_funds: i64,
    #[serde(default)]
    pub initial_influence: i64,
    #[serde(default)]
    pub initial_talent_attraction: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMetric {
    /// Funds held by the role's organization.
    OwnFunds,
    /// Number of techs the role's organization has unlocked.
    OwnTechCount,
    /// 100 minus world chaos.
    Stability,
    /// Influence of the role's organization.
    Influence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalTerm {
    pub metric: GoalMetric,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleSheet {
    pub id: RoleId,
    pub title: String,
    pub organization: OrgId,
    pub entitlements: Vec<OrderKind>,
    pub goal: Vec<GoalTerm>,
    pub briefing: String,
}

impl RoleSheet {
    pub fn may_issue(&self, kind: OrderKind) -> bool {
        self.entitlements.contains(&kind)
    }
}

/// Tunable chaos constants. Thresholds live on the event table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosRules {
    pub initial: i64,
    pub exposed_espionage_delta: i64,
    pub breakup_delta: i64,
    /// Applied once per talent committed to a safety investment (normally negative).
    pub safety_delta_per_talent: i64,
}

impl Default for ChaosRules {
    fn default() -> Self {
        Self {
            initial: 20,
            exposed_espionage_delta: 2,
            breakup_delta: 1,
            safety_delta_per_talent: -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketRules {
    /// Unallocated world talent at game start.
    pub initial_free_talent: i64,
    /// Funds a poacher must pay per talent moved.
    pub poach_cost_per_talent: i64,
    /// Funds spent lobbying per point of influence gained.
    pub lobby_funds_per_influence: i64,
    /// Influence a government gains per Regulate order.
    pub regulate_influence: i64,
}

impl Default for MarketRules {
    fn default() -> Self {
        Self {
            initial_free_talent: 12,
            poach_cost_per_talent: 2,
            lobby_funds_per_influence: 2,
            regulate_influence: 1,
        }
    }
}

/// A scripted or facilitator-injected world event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldEventSpec {
    pub id: WorldEventId,
    pub name: String,
    /// Fires when chaos rises from below this value to at least this value.
    /// `None` for events that only the facilitator injects.
    #[serde(default)]
    pub threshold: Option<i64>,
    pub narrative: String,
    pub effects: Vec<ParameterEffect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiceRule {
    pub sides: u8,
    /// A die succeeds when it shows `success_threshold..=sides`.
    pub success_threshold: u8,
}

impl Default for DiceRule {
    fn default() -> Self {
        Self {
            sides: 6,
            success_threshold: 5,
        }
    }
}

impl DiceRule {
    pub fn is_success(&self, face: u8) -> bool {
        face >= self.success_threshold
    }

    pub fn successes(&self, faces: &[u8]) -> i64 {
        faces.iter().filter(|&&f| self.is_success(f)).count() as i64
    }

    /// Probability that one die succeeds, as (numerator, denominator).
    pub fn success_ratio(&self) -> (u32, u32) {
        (
            u32::from(self.sides) - u32::from(self.success_threshold) + 1,
            u32::from(self.sides),
        )
    }

    pub fn success_probability(&self) -> f64 {
        let (num, den) = self.success_ratio();
        f64::from(num) / f64::from(den)
    }
}
