//! Rules engine, scenario content and simulation agents for a seminar-style
//! AI futures role-play game.
//!
//! The game is an event-sourced state machine: [`engine::GameState`] only
//! changes by appending [`model::GameEvent`]s, and [`engine::replay`] folds a
//! log back into the identical state.

pub mod agents;
pub mod content;
pub mod engine;
pub mod error;
pub mod generate;
pub mod ids;
pub mod model;
pub mod rng;
pub mod validate;

pub use engine::{new_game, Caller, FilteredView, GameState, ResolutionReport};
pub use error::GameError;
pub use ids::{OrgId, PlayerId, ProductId, RoleId, TechId, WorldEventId};
pub use model::*;
