//! String newtypes for the identifiers that appear in scenario content and event logs.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Technology node in the tech tree.
    TechId
);
id_type!(
    /// Product card in the product deck.
    ProductId
);
id_type!(
    /// Organization (government or corporation).
    OrgId
);
id_type!(
    /// Role sheet; one human player or scripted agent per role.
    RoleId
);
id_type!(
    /// Opaque player handle supplied by whoever seats the players.
    PlayerId
);
id_type!(WorldEventId);

/// Ids that collide with the reserved actor and scope names in event logs.
pub const RESERVED_IDS: &[&str] = &["facilitator", "world", "self"];
