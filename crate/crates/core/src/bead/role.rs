use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Viewer roles a clearance deny-list can name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Patient,
    Family,
    PrimaryCare,
    Specialist,
    Nurse,
    Pharmacist,
    Insurance,
    Researcher,
    Emergency,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role {0:?}")]
pub struct UnknownRole(pub String);

impl Role {
    pub const ALL: [Role; 9] = [
        Role::Patient,
        Role::Family,
        Role::PrimaryCare,
        Role::Specialist,
        Role::Nurse,
        Role::Pharmacist,
        Role::Insurance,
        Role::Researcher,
        Role::Emergency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Family => "family",
            Role::PrimaryCare => "primary_care",
            Role::Specialist => "specialist",
            Role::Nurse => "nurse",
            Role::Pharmacist => "pharmacist",
            Role::Insurance => "insurance",
            Role::Researcher => "researcher",
            Role::Emergency => "emergency",
        }
    }
}

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRole(s.to_owned()))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
