use thiserror::Error;

use crate::ids::{OrgId, RoleId, TechId};
use crate::model::{OrderKind, OrderRef, Phase};
use crate::validate::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("scenario failed validation with {} violation(s)", .0.len())]
    InvalidScenario(Vec<Violation>),
    #[error("incomplete role assignment: {0}")]
    IncompleteAssignment(String),
    #[error("not allowed during {phase}")]
    WrongPhase { phase: Phase },
    #[error("unknown role '{0}'")]
    UnknownRole(RoleId),
    #[error("role '{role}' may not issue {kind}")]
    NotEntitled { role: RoleId, kind: OrderKind },
    #[error("{org} has {available} talent but orders commit {requested}")]
    InsufficientTalent {
        org: OrgId,
        requested: i64,
        available: i64,
    },
    #[error("{org} has {available} funds but orders commit {requested}")]
    InsufficientFunds {
        org: OrgId,
        requested: i64,
        available: i64,
    },
    #[error("{org} has not unlocked the prerequisites of {tech}")]
    PrerequisiteLocked { org: OrgId, tech: TechId },
    #[error("unknown target '{0}'")]
    UnknownTarget(String),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("free-text orders awaiting a ruling: {}", fmt_refs(.0))]
    UnruledFreeText(Vec<OrderRef>),
    #[error("only the facilitator may do this")]
    NotFacilitator,
    #[error("order {0} has already been ruled")]
    AlreadyRuled(OrderRef),
    #[error("no pending free-text order {0}")]
    UnknownOrder(OrderRef),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
}

fn fmt_refs(refs: &[OrderRef]) -> String {
    refs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl GameError {
    /// Stable name used on the wire and in CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            GameError::InvalidScenario(_) => "InvalidScenario",
            GameError::IncompleteAssignment(_) => "IncompleteAssignment",
            GameError::WrongPhase { .. } => "WrongPhase",
            GameError::UnknownRole(_) => "UnknownRole",
            GameError::NotEntitled { .. } => "NotEntitled",
            GameError::InsufficientTalent { .. } => "InsufficientTalent",
            GameError::InsufficientFunds { .. } => "InsufficientFunds",
            GameError::PrerequisiteLocked { .. } => "PrerequisiteLocked",
            GameError::UnknownTarget(_) => "UnknownTarget",
            GameError::InvalidOrder(_) => "InvalidOrder",
            GameError::UnruledFreeText(_) => "UnruledFreeText",
            GameError::NotFacilitator => "NotFacilitator",
            GameError::AlreadyRuled(_) => "AlreadyRuled",
            GameError::UnknownOrder(_) => "UnknownOrder",
            GameError::CorruptLog(_) => "CorruptLog",
        }
    }
}
