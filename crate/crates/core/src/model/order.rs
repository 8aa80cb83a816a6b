use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{OrgId, ProductId, RoleId, TechId};
use crate::model::scenario::ProductCategory;

/// Whether an order was submitted in the private or the public action phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTag {
    Private,
    Public,
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseTag::Private => "private",
            PhaseTag::Public => "public",
        })
    }
}

/// The closed catalog of order kinds, used for role entitlements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrderKind {
    AllocateResearch,
    AllocateDevelopment,
    DeployProduct,
    WithdrawProduct,
    Publish,
    Espionage,
    PoachTalent,
    Regulate,
    Tax,
    Breakup,
    Lobby,
    Collaborate,
    SafetyInvestment,
    FreeText,
}

impl OrderKind {
    pub const ALL: [OrderKind; 14] = [
        OrderKind::AllocateResearch,
        OrderKind::AllocateDevelopment,
        OrderKind::DeployProduct,
        OrderKind::WithdrawProduct,
        OrderKind::Publish,
        OrderKind::Espionage,
        OrderKind::PoachTalent,
        OrderKind::Regulate,
        OrderKind::Tax,
        OrderKind::Breakup,
        OrderKind::Lobby,
        OrderKind::Collaborate,
        OrderKind::SafetyInvestment,
        OrderKind::FreeText,
    ];

    /// Orders only a government role may hold.
    pub fn government_only(self) -> bool {
        matches!(self, OrderKind::Regulate | OrderKind::Tax | OrderKind::Breakup)
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Action {
    AllocateResearch {
        tech: TechId,
        talent: i64,
        visibility: PhaseTag,
    },
    AllocateDevelopment {
        product: ProductId,
        talent: i64,
        visibility: PhaseTag,
    },
    DeployProduct {
        product: ProductId,
    },
    WithdrawProduct {
        product: ProductId,
    },
    Publish {
        tech: TechId,
    },
    Espionage {
        target_org: OrgId,
        talent: i64,
    },
    PoachTalent {
        target_org: OrgId,
        amount: i64,
        funds_offered: i64,
    },
    Regulate {
        category: ProductCategory,
    },
    Tax {
        target_org: OrgId,
        rate_percent: i64,
    },
    Breakup {
        target_org: OrgId,
    },
    Lobby {
        target_org: OrgId,
        funds: i64,
    },
    Collaborate {
        partner_org: OrgId,
        tech: TechId,
        talent: i64,
    },
    SafetyInvestment {
        talent: i64,
    },
    FreeText {
        text: String,
    },
}

impl Action {
    pub fn kind(&self) -> OrderKind {
        match self {
            Action::AllocateResearch { .. } => OrderKind::AllocateResearch,
            Action::AllocateDevelopment { .. } => OrderKind::AllocateDevelopment,
            Action::DeployProduct { .. } => OrderKind::DeployProduct,
            Action::WithdrawProduct { .. } => OrderKind::WithdrawProduct,
            Action::Publish { .. } => OrderKind::Publish,
            Action::Espionage { .. } => OrderKind::Espionage,
            Action::PoachTalent { .. } => OrderKind::PoachTalent,
            Action::Regulate { .. } => OrderKind::Regulate,
            Action::Tax { .. } => OrderKind::Tax,
            Action::Breakup { .. } => OrderKind::Breakup,
            Action::Lobby { .. } => OrderKind::Lobby,
            Action::Collaborate { .. } => OrderKind::Collaborate,
            Action::SafetyInvestment { .. } => OrderKind::SafetyInvestment,
            Action::FreeText { .. } => OrderKind::FreeText,
        }
    }

    /// Talent this action ties up for the turn.
    pub fn talent_committed(&self) -> i64 {
        match self {
            Action::AllocateResearch { talent, .. }
            | Action::AllocateDevelopment { talent, .. }
            | Action::Espionage { talent, .. }
            | Action::Collaborate { talent, .. }
            | Action::SafetyInvestment { talent } => *talent,
            _ => 0,
        }
    }

    /// Funds this action commits for the turn.
    pub fn funds_committed(&self) -> i64 {
        match self {
            Action::PoachTalent { funds_offered, .. } => *funds_offered,
            Action::Lobby { funds, .. } => *funds,
            _ => 0,
        }
    }
}

/// A role's submitted action for the current turn.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Order {
    pub issuing_role: RoleId,
    pub phase_tag: PhaseTag,
    pub action: Action,
}

impl Order {
    pub fn new(issuing_role: impl Into<RoleId>, phase_tag: PhaseTag, action: Action) -> Self {
        Self {
            issuing_role: issuing_role.into(),
            phase_tag,
            action,
        }
    }

    pub fn kind(&self) -> OrderKind {
        self.action.kind()
    }
}

/// Points at one pending order: the `index`-th order `role` submitted in `phase_tag`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderRef {
    pub role: RoleId,
    pub phase_tag: PhaseTag,
    pub index: usize,
}

impl fmt::Display for OrderRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.role, self.phase_tag, self.index)
    }
}
