use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::{OrgId, PlayerId, ProductId, RoleId, TechId, WorldEventId};
use crate::model::order::{Order, OrderRef, PhaseTag};
use crate::model::scenario::{Scenario, WorldEventSpec};
use crate::model::world::{Phase, ProjectKind, ProjectRecord};

/// Who may see an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case", deny_unknown_fields)]
pub enum Visibility {
    Public,
    /// Every role of one organization.
    Org { org: OrgId },
    /// Named roles only (negotiation messages).
    Roles { roles: Vec<RoleId> },
    FacilitatorOnly,
}

/// The party looking at the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Viewer<'a> {
    Facilitator,
    Role { role: &'a RoleId, org: &'a OrgId },
}

impl Visibility {
    pub fn for_tag(tag: PhaseTag, org: &OrgId) -> Self {
        match tag {
            PhaseTag::Public => Visibility::Public,
            PhaseTag::Private => Visibility::Org { org: org.clone() },
        }
    }

    pub fn admits(&self, viewer: Viewer<'_>) -> bool {
        match (self, viewer) {
            (_, Viewer::Facilitator) => true,
            (Visibility::Public, _) => true,
            (Visibility::Org { org }, Viewer::Role { org: own, .. }) => org == own,
            (Visibility::Roles { roles }, Viewer::Role { role, .. }) => roles.contains(role),
            (Visibility::FacilitatorOnly, Viewer::Role { .. }) => false,
        }
    }
}

/// Originator of an event. Serialized as the role id, `"facilitator"` or `"world"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Actor {
    Role(RoleId),
    Facilitator,
    World,
}

impl From<String> for Actor {
    fn from(s: String) -> Self {
        match s.as_str() {
            "facilitator" => Actor::Facilitator,
            "world" => Actor::World,
            _ => Actor::Role(RoleId::from(s)),
        }
    }
}

impl From<Actor> for String {
    fn from(a: Actor) -> Self {
        match a {
            Actor::Role(r) => r.to_string(),
            Actor::Facilitator => "facilitator".to_owned(),
            Actor::World => "world".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RulingDelta {
    Funds { org: OrgId, delta: i64 },
    Talent { org: OrgId, delta: i64 },
    Influence { org: OrgId, delta: i64 },
    TalentAttraction { org: OrgId, delta: i64 },
    Chaos { delta: i64 },
    /// Honored at resolution only if the org holds every prerequisite.
    GrantTech { org: OrgId, tech: TechId },
}

/// The facilitator's binding decision on a free-text order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ruling {
    pub narrative: String,
    #[serde(default)]
    pub deltas: Vec<RulingDelta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlockSource {
    Research,
    Collaboration,
    Grant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", deny_unknown_fields)]
pub enum EventPayload {
    GameCreated {
        scenario: Box<Scenario>,
        seed: u64,
        assignments: BTreeMap<RoleId, PlayerId>,
    },
    PhaseChanged {
        from: Phase,
        to: Phase,
        turn: i64,
        year: i64,
    },
    MessageSent {
        from: RoleId,
        /// Empty for a broadcast.
        to: Vec<RoleId>,
        text: String,
    },
    OrdersSubmitted {
        role: RoleId,
        phase_tag: PhaseTag,
        orders: Vec<Order>,
    },
    FreeTextRuled {
        order: OrderRef,
        ruling: Ruling,
    },
    WorldEventQueued {
        event: WorldEventSpec,
    },
    ProjectStarted {
        org: OrgId,
        project: ProjectKind,
        target: String,
        visibility: PhaseTag,
    },
    ResearchRolled {
        org: OrgId,
        tech: TechId,
        partner: Option<OrgId>,
        /// Label of the random stream the dice came from.
        stream: String,
        dice: Vec<u8>,
        successes: i64,
    },
    DevelopmentRolled {
        org: OrgId,
        product: ProductId,
        stream: String,
        dice: Vec<u8>,
        successes: i64,
    },
    TechUnlocked {
        org: OrgId,
        tech: TechId,
        source: UnlockSource,
    },
    ProductDeveloped {
        org: OrgId,
        product: ProductId,
    },
    ProductDeployed {
        org: OrgId,
        product: ProductId,
    },
    ProductWithdrawn {
        org: OrgId,
        product: ProductId,
    },
    TechPublished {
        org: OrgId,
        tech: TechId,
        project: Option<ProjectRecord>,
    },
    EspionageRolled {
        attacker: OrgId,
        target: OrgId,
        stream: String,
        dice: Vec<u8>,
        successes: i64,
        exposed: bool,
    },
    EspionageFinding {
        attacker: OrgId,
        target: OrgId,
        projects: Vec<ProjectRecord>,
    },
    EspionageExposed {
        attacker: OrgId,
        target: OrgId,
    },
    /// Moves talent between pools; `None` is the free world pool.
    TalentMoved {
        from: Option<OrgId>,
        to: Option<OrgId>,
        amount: i64,
        reason: String,
    },
    /// Creates or destroys talent; the only event that changes total talent.
    TalentAdjusted {
        org: OrgId,
        delta: i64,
        reason: String,
    },
    FundsChanged {
        org: OrgId,
        delta: i64,
        reason: String,
    },
    InfluenceChanged {
        org: OrgId,
        delta: i64,
        reason: String,
    },
    AttractionChanged {
        org: OrgId,
        delta: i64,
        reason: String,
    },
    ChaosChanged {
        from: i64,
        to: i64,
        reason: String,
    },
    ChaosBreakdown {
        products: i64,
        actions: i64,
        facilitator: i64,
    },
    WorldEventTriggered {
        event: WorldEventId,
        name: String,
        narrative: String,
    },
    Bulletin {
        text: String,
    },
    TurnResolved {
        turn: i64,
    },
    GameFinished {},
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::GameCreated { .. } => "GameCreated",
            EventPayload::PhaseChanged { .. } => "PhaseChanged",
            EventPayload::MessageSent { .. } => "MessageSent",
            EventPayload::OrdersSubmitted { .. } => "OrdersSubmitted",
            EventPayload::FreeTextRuled { .. } => "FreeTextRuled",
            EventPayload::WorldEventQueued { .. } => "WorldEventQueued",
            EventPayload::ProjectStarted { .. } => "ProjectStarted",
            EventPayload::ResearchRolled { .. } => "ResearchRolled",
            EventPayload::DevelopmentRolled { .. } => "DevelopmentRolled",
            EventPayload::TechUnlocked { .. } => "TechUnlocked",
            EventPayload::ProductDeveloped { .. } => "ProductDeveloped",
            EventPayload::ProductDeployed { .. } => "ProductDeployed",
            EventPayload::ProductWithdrawn { .. } => "ProductWithdrawn",
            EventPayload::TechPublished { .. } => "TechPublished",
            EventPayload::EspionageRolled { .. } => "EspionageRolled",
            EventPayload::EspionageFinding { .. } => "EspionageFinding",
            EventPayload::EspionageExposed { .. } => "EspionageExposed",
            EventPayload::TalentMoved { .. } => "TalentMoved",
            EventPayload::TalentAdjusted { .. } => "TalentAdjusted",
            EventPayload::FundsChanged { .. } => "FundsChanged",
            EventPayload::InfluenceChanged { .. } => "InfluenceChanged",
            EventPayload::AttractionChanged { .. } => "AttractionChanged",
            EventPayload::ChaosChanged { .. } => "ChaosChanged",
            EventPayload::ChaosBreakdown { .. } => "ChaosBreakdown",
            EventPayload::WorldEventTriggered { .. } => "WorldEventTriggered",
            EventPayload::Bulletin { .. } => "Bulletin",
            EventPayload::TurnResolved { .. } => "TurnResolved",
            EventPayload::GameFinished { .. } => "GameFinished",
        }
    }
}

/// One entry of the append-only game log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEvent {
    pub seq: u64,
    pub turn: i64,
    pub phase: Phase,
    pub actor: Actor,
    pub visibility: Visibility,
    #[serde(flatten)]
    pub body: EventPayload,
}

impl GameEvent {
    pub fn kind(&self) -> &'static str {
        self.body.kind()
    }
}
