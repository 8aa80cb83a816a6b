use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{OrgId, ProductId, TechId};
use crate::model::order::PhaseTag;
use crate::model::scenario::{OrgKind, OrganizationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Negotiation,
    PrivateActions,
    PublicActions,
    WorldUpdate,
    Debrief,
    Finished,
}

impl Phase {
    /// The fixed per-turn cycle.
    pub const CYCLE: [Phase; 4] = [
        Phase::Negotiation,
        Phase::PrivateActions,
        Phase::PublicActions,
        Phase::WorldUpdate,
    ];

    /// The tag orders must carry to be accepted in this phase.
    pub fn order_tag(self) -> Option<PhaseTag> {
        match self {
            Phase::PrivateActions => Some(PhaseTag::Private),
            Phase::PublicActions => Some(PhaseTag::Public),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectKind {
    Research,
    Development,
}

/// A research or development effort an organization has started.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub kind: ProjectKind,
    /// Tech id for research, product id for development.
    pub target: String,
    pub visibility: PhaseTag,
    pub started_turn: i64,
    pub progress: i64,
    pub completed_turn: Option<i64>,
}

impl ProjectRecord {
    pub fn key(kind: ProjectKind, target: &str) -> String {
        match kind {
            ProjectKind::Research => format!("research:{target}"),
            ProjectKind::Development => format!("development:{target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganizationState {
    pub id: OrgId,
    pub kind: OrgKind,
    pub talent_pool: i64,
    pub funds: i64,
    pub influence: i64,
    pub talent_attraction: i64,
    pub unlocked_techs: BTreeSet<TechId>,
    pub research_progress: BTreeMap<TechId, i64>,
    pub development_progress: BTreeMap<ProductId, i64>,
    pub developed_products: BTreeSet<ProductId>,
    pub deployed_products: BTreeSet<ProductId>,
    /// Keyed by [`ProjectRecord::key`].
    pub projects: BTreeMap<String, ProjectRecord>,
}

impl OrganizationState {
    pub fn from_spec(spec: &OrganizationSpec) -> Self {
        Self {
            id: spec.id.clone(),
            kind: spec.kind,
            talent_pool: spec.initial_talent,
            funds: spec.initial_funds,
            influence: spec.initial_influence,
            talent_attraction: spec.initial_talent_attraction,
            unlocked_techs: BTreeSet::new(),
            research_progress: BTreeMap::new(),
            development_progress: BTreeMap::new(),
            developed_products: BTreeSet::new(),
            deployed_products: BTreeSet::new(),
            projects: BTreeMap::new(),
        }
    }

    pub fn private_projects(&self) -> impl Iterator<Item = &ProjectRecord> {
        self.projects
            .values()
            .filter(|p| p.visibility == PhaseTag::Private)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub turn: i64,
    pub year: i64,
    pub phase: Phase,
    /// Always within `0..=100`.
    pub chaos: i64,
    pub free_talent: i64,
    pub orgs: BTreeMap<OrgId, OrganizationState>,
    /// Publishing organizations per tech.
    pub published: BTreeMap<TechId, BTreeSet<OrgId>>,
    /// Headline log, one entry per bulletin line.
    pub narrative: Vec<String>,
}

impl WorldState {
    pub fn total_talent(&self) -> i64 {
        self.free_talent + self.orgs.values().map(|o| o.talent_pool).sum::<i64>()
    }
}
