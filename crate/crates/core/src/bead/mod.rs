//! The Bead data model.
//!
//! A [`Bead`] is an immutable clinical event. Its identity is the SHA-256
//! digest of the canonical JSON encoding of every field except `id` and
//! `signature`, so the parent links embedded in a bead commit to the full
//! history behind it.

pub mod canonical;
mod id;
mod role;
pub mod signing;
pub mod validate;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use id::{BeadId, InvalidBeadId, ID_PREFIX};
pub use role::{Role, UnknownRole};
pub use signing::{sign, verify_signature, KeyFormatError, Keyring, PublicKey, SecretKey};
pub use validate::{validate_document, ValidationError, ValidationReport};

/// Reference to an external binary (imaging, PDF) by location and digest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub uri: String,
    pub mime_type: String,
    pub hash: BeadId,
}

impl Evidence {
    /// Checks `bytes` against the recorded digest.
    pub fn matches(&self, bytes: &[u8]) -> bool {
        BeadId::digest_of(bytes) == self.hash
    }
}

/// Role deny-list embedded in a bead.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clearance {
    pub denied_roles: Vec<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Clearance {
    pub fn denies(&self, role: Role) -> bool {
        self.denied_roles.contains(&role)
    }
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Every hashed field of a bead: what an author submits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    #[serde(rename = "type")]
    pub kind: String,
    pub timestamp: String,
    pub author: String,
    #[serde(default)]
    pub parents: Vec<BeadId>,
    #[serde(default = "empty_object")]
    pub content: Value,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance: Option<Clearance>,
}

impl Draft {
    /// A draft with empty content and no parents, evidence or clearance.
    pub fn new(
        kind: impl Into<String>,
        timestamp: impl Into<String>,
        author: impl Into<String>,
    ) -> Self {
        Draft {
            kind: kind.into(),
            timestamp: timestamp.into(),
            author: author.into(),
            parents: Vec::new(),
            content: empty_object(),
            evidence: Vec::new(),
            clearance: None,
        }
    }

    pub fn with_parents(mut self, parents: impl IntoIterator<Item = BeadId>) -> Self {
        self.parents = parents.into_iter().collect();
        self
    }

    pub fn with_content(mut self, content: Value) -> Self {
        self.content = content;
        self
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence.push(evidence);
        self
    }

    pub fn with_clearance(mut self, clearance: Clearance) -> Self {
        self.clearance = Some(clearance);
        self
    }

    /// Parses a raw JSON draft, reporting every violated invariant at once.
    ///
    /// `id` and `signature` members are ignored if present.
    pub fn from_document(doc: &Value) -> Result<Draft, ValidationReport> {
        let report = validate_document(doc);
        if !report.is_ok() {
            return Err(report);
        }
        serde_json::from_value(doc.clone()).map_err(|e| {
            ValidationReport::from(vec![ValidationError::MalformedField {
                field: "draft".into(),
                reason: e.to_string(),
            }])
        })
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate_draft(self)
    }

    /// Canonical bytes: the hash and signature preimage.
    pub fn canonicalize(&self) -> Result<Vec<u8>, BeadError> {
        canonical::canonicalize(self)
    }

    pub fn compute_id(&self) -> Result<BeadId, BeadError> {
        Ok(BeadId::digest_of(&self.canonicalize()?))
    }

    pub fn instant(&self) -> Option<DateTime<Utc>> {
        parse_timestamp(&self.timestamp)
    }

    /// True when `content.administrative` is set (billing and care-team records).
    pub fn is_administrative(&self) -> bool {
        self.content.get("administrative").and_then(Value::as_bool) == Some(true)
    }

    /// Whether `role` may see this bead.
    pub fn visible_to(&self, role: Role) -> bool {
        !self.clearance.as_ref().is_some_and(|c| c.denies(role))
    }
}

/// A stored bead: draft plus derived id and optional detached signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub id: BeadId,
    #[serde(flatten)]
    pub draft: Draft,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

impl Bead {
    /// Seals a draft, computing its id.
    pub fn seal(draft: Draft, signature: Option<String>) -> Result<Bead, BeadError> {
        let id = draft.compute_id()?;
        Ok(Bead {
            id,
            draft,
            signature,
        })
    }

    pub fn parents(&self) -> &[BeadId] {
        &self.draft.parents
    }

    pub fn kind(&self) -> &str {
        &self.draft.kind
    }

    pub fn timestamp(&self) -> &str {
        &self.draft.timestamp
    }

    /// Chronological sort key: parsed instant, then id.
    pub fn sort_key(&self) -> (Option<DateTime<Utc>>, BeadId) {
        (self.draft.instant(), self.id.clone())
    }

    /// Full stored encoding: canonical JSON including `id` and `signature`.
    pub fn to_stored_bytes(&self) -> Result<Vec<u8>, BeadError> {
        let value = serde_json::to_value(self).expect("bead serializes to a JSON value");
        canonical::to_canonical_bytes(&value)
    }

    pub fn from_stored_bytes(bytes: &[u8]) -> Result<Bead, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// Parses an ISO 8601 / RFC 3339 instant with offset.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

#[derive(Debug, thiserror::Error)]
pub enum BeadError {
    #[error("invalid draft: {0}")]
    InvalidDraft(ValidationReport),
    #[error("number {0} has no canonical JSON form")]
    NonCanonicalizableNumber(f64),
    #[error("bead carries no signature")]
    MissingSignature,
    #[error(transparent)]
    KeyFormat(#[from] KeyFormatError),
}

impl fmt::Display for Draft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {} by {}", self.kind, self.timestamp, self.author)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn note() -> Draft {
        Draft::new("medical_note", "2026-01-26T10:00:00Z", "did:medbeads:doctor:12345")
            .with_content(json!({"structured": {"diagnosis": "Pneumonia", "icd10": "J18.9"}}))
            .with_clearance(Clearance {
                denied_roles: vec![Role::Family, Role::Insurance],
                reason: Some("Sensitive psychiatric context".into()),
            })
    }

    #[test]
    fn serializes_in_listing_shape() {
        let bead = Bead::seal(note(), None).unwrap();
        let v = serde_json::to_value(&bead).unwrap();
        assert_eq!(v["type"], "medical_note");
        assert_eq!(v["clearance"]["denied_roles"], json!(["family", "insurance"]));
        assert!(v.get("signature").is_none());
        let back: Bead = serde_json::from_value(v).unwrap();
        assert_eq!(back, bead);
    }

    #[test]
    fn stored_bytes_round_trip() {
        let bead = Bead::seal(note(), Some("base64:abc".into())).unwrap();
        let bytes = bead.to_stored_bytes().unwrap();
        assert_eq!(Bead::from_stored_bytes(&bytes).unwrap(), bead);
        assert!(bytes.starts_with(b"{\"author\":"));
    }

    #[test]
    fn visibility_follows_deny_list() {
        let d = note();
        assert!(!d.visible_to(Role::Insurance));
        assert!(!d.visible_to(Role::Family));
        assert!(d.visible_to(Role::Specialist));
        assert!(Draft::new("x", "2026-01-26T10:00:00Z", "a").visible_to(Role::Insurance));
    }

    #[test]
    fn evidence_matches_bytes() {
        let ev = Evidence {
            uri: "s3://hospital-pacs/2026/ct_chest_001.dcm".into(),
            mime_type: "application/dicom".into(),
            hash: BeadId::digest_of(b"DICM"),
        };
        assert!(ev.matches(b"DICM"));
        assert!(!ev.matches(b"DICN"));
    }

    #[test]
    fn from_document_ignores_id_and_signature() {
        let doc = json!({
            "id": "sha256:00",
            "type": "medical_note",
            "timestamp": "2026-01-26T10:00:00Z",
            "author": "did:medbeads:doctor:12345",
            "signature": "base64:AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA=="
        });
        let d = Draft::from_document(&doc).unwrap();
        assert!(d.parents.is_empty());
        assert_eq!(d.content, json!({}));
    }
}
