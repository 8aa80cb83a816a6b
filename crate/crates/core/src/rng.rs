//! Keyed random streams.
//!
//! Every draw in a game comes from a ChaCha8 stream derived from the game seed
//! and a key naming who is rolling for what. Adding or removing one actor's
//! orders never shifts the dice another actor sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::model::DiceRule;

/// Identifies one independent stream within a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey<'a> {
    pub turn: i64,
    pub step: &'a str,
    pub actor: &'a str,
    pub subject: &'a str,
}

impl<'a> StreamKey<'a> {
    pub fn new(turn: i64, step: &'a str, actor: &'a str, subject: &'a str) -> Self {
        Self {
            turn,
            step,
            actor,
            subject,
        }
    }

    /// Cursor label recorded in the game state.
    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.turn, self.step, self.actor, self.subject)
    }
}

/// Derives the stream for `key` under `seed`.
pub fn stream(seed: u64, key: StreamKey<'_>) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.turn.to_le_bytes());
    for part in [key.step, key.actor, key.subject] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Rolls `n` dice.
pub fn roll<R: Rng + ?Sized>(rng: &mut R, rule: DiceRule, n: i64) -> Vec<u8> {
    (0..n.max(0))
        .map(|_| rng.random_range(1..=rule.sides))
        .collect()
}
