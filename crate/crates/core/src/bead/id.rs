use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const ID_PREFIX: &str = "sha256:";
const HEX_LEN: usize = 64;

/// Content hash identity: `sha256:` followed by 64 lowercase hex digits.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeadId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bead id {0:?}: expected sha256:<64 lowercase hex>")]
pub struct InvalidBeadId(pub String);

impl BeadId {
    pub fn parse(s: &str) -> Result<BeadId, InvalidBeadId> {
        let hex = s
            .strip_prefix(ID_PREFIX)
            .ok_or_else(|| InvalidBeadId(s.to_owned()))?;
        if hex.len() != HEX_LEN || !hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(InvalidBeadId(s.to_owned()));
        }
        Ok(BeadId(s.to_owned()))
    }

    pub fn from_digest(digest: [u8; 32]) -> BeadId {
        BeadId(format!("{ID_PREFIX}{}", hex::encode(digest)))
    }

    /// SHA-256 of `bytes` in id form.
    pub fn digest_of(bytes: &[u8]) -> BeadId {
        BeadId::from_digest(Sha256::digest(bytes).into())
    }

    /// Rebuilds an id from a sharded object path (`prefix` + `rest`).
    pub fn from_shard(prefix: &str, rest: &str) -> Result<BeadId, InvalidBeadId> {
        BeadId::parse(&format!("{ID_PREFIX}{prefix}{rest}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn hex(&self) -> &str {
        &self.0[ID_PREFIX.len()..]
    }

    /// Two-character directory prefix and 62-character remainder.
    pub fn shard(&self) -> (&str, &str) {
        self.hex().split_at(2)
    }
}

impl FromStr for BeadId {
    type Err = InvalidBeadId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BeadId::parse(s)
    }
}

impl fmt::Display for BeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for BeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BeadId({})", &self.0[..ID_PREFIX.len() + 12])
    }
}

impl AsRef<str> for BeadId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for BeadId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for BeadId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BeadId::parse(&s).map_err(serde::de::Error::custom)
    }
}
