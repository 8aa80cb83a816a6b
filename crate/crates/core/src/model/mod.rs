//! Game entities: static scenario content, orders, world state and log events.

pub mod event;
pub mod order;
pub mod scenario;
pub mod world;

pub use event::{
    Actor, EventPayload, GameEvent, Ruling, RulingDelta, UnlockSource, Viewer, Visibility,
};
pub use order::{Action, Order, OrderKind, OrderRef, PhaseTag};
pub use scenario::{
    ChaosRules, DiceRule, EffectScope, EffectTarget, GoalMetric, GoalTerm, MarketRules, OrgKind,
    OrganizationSpec, ParameterEffect, ProductCard, ProductCategory, RoleSheet, Scenario,
    TechNode, WorldEventSpec,
};
pub use world::{OrganizationState, Phase, ProjectKind, ProjectRecord, WorldState};
