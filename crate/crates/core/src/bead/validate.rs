//! Draft validation. Errors are collected, not short-circuited.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use super::{parse_timestamp, signing, BeadId, Draft, Role};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ValidationError {
    NotAnObject,
    MissingType,
    MissingAuthor,
    MalformedTimestamp { value: String },
    MalformedParent { value: String },
    DuplicateParent { id: BeadId },
    InvalidRole { value: String },
    DuplicateRole { role: Role },
    InvalidEvidence { index: usize, reason: String },
    MalformedSignature,
    MalformedField { field: String, reason: String },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::NotAnObject => f.write_str("draft is not a JSON object"),
            ValidationError::MissingType => f.write_str("type is missing or empty"),
            ValidationError::MissingAuthor => f.write_str("author is missing or empty"),
            ValidationError::MalformedTimestamp { value } => {
                write!(f, "timestamp {value:?} is not an ISO 8601 instant")
            }
            ValidationError::MalformedParent { value } => {
                write!(f, "parent {value:?} is not a bead id")
            }
            ValidationError::DuplicateParent { id } => write!(f, "parent {id} listed twice"),
            ValidationError::InvalidRole { value } => write!(f, "unknown role {value:?}"),
            ValidationError::DuplicateRole { role } => write!(f, "role {role} denied twice"),
            ValidationError::InvalidEvidence { index, reason } => {
                write!(f, "evidence[{index}]: {reason}")
            }
            ValidationError::MalformedSignature => {
                f.write_str("signature is not base64:<64-byte ed25519 signature>")
            }
            ValidationError::MalformedField { field, reason } => write!(f, "{field}: {reason}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn contains(&self, pred: impl Fn(&ValidationError) -> bool) -> bool {
        self.errors.iter().any(pred)
    }
}

impl From<Vec<ValidationError>> for ValidationReport {
    fn from(errors: Vec<ValidationError>) -> Self {
        ValidationReport { errors }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

pub(crate) fn validate_draft(draft: &Draft) -> ValidationReport {
    let mut errors = Vec::new();
    if draft.kind.is_empty() {
        errors.push(ValidationError::MissingType);
    }
    if draft.author.is_empty() {
        errors.push(ValidationError::MissingAuthor);
    }
    if parse_timestamp(&draft.timestamp).is_none() {
        errors.push(ValidationError::MalformedTimestamp {
            value: draft.timestamp.clone(),
        });
    }
    let mut seen = HashSet::new();
    for p in &draft.parents {
        if !seen.insert(p) {
            errors.push(ValidationError::DuplicateParent { id: p.clone() });
        }
    }
    for (index, ev) in draft.evidence.iter().enumerate() {
        if ev.uri.is_empty() {
            errors.push(ValidationError::InvalidEvidence {
                index,
                reason: "uri is empty".into(),
            });
        }
    }
    if let Some(c) = &draft.clearance {
        let mut seen = HashSet::new();
        for role in &c.denied_roles {
            if !seen.insert(role) {
                errors.push(ValidationError::DuplicateRole { role: *role });
            }
        }
    }
    errors.into()
}

/// Validates a raw JSON draft as received over the wire.
///
/// Reports every error the typed [`Draft`] cannot represent (malformed
/// parent ids, unknown roles, wrong member types) alongside the typed checks.
/// A `signature` member, when present, must be well formed.
pub fn validate_document(doc: &Value) -> ValidationReport {
    let Some(obj) = doc.as_object() else {
        return vec![ValidationError::NotAnObject].into();
    };
    let mut errors = Vec::new();

    match obj.get("type") {
        Some(Value::String(s)) if !s.is_empty() => {}
        _ => errors.push(ValidationError::MissingType),
    }
    match obj.get("author") {
        Some(Value::String(s)) if !s.is_empty() => {}
        _ => errors.push(ValidationError::MissingAuthor),
    }
    match obj.get("timestamp") {
        Some(Value::String(s)) if parse_timestamp(s).is_some() => {}
        Some(Value::String(s)) => errors.push(ValidationError::MalformedTimestamp { value: s.clone() }),
        other => errors.push(ValidationError::MalformedTimestamp {
            value: other.map(Value::to_string).unwrap_or_default(),
        }),
    }

    match obj.get("parents") {
        None => {}
        Some(Value::Array(items)) => {
            let mut seen = HashSet::new();
            for item in items {
                match item.as_str().map(BeadId::parse) {
                    Some(Ok(id)) => {
                        if !seen.insert(id.clone()) {
                            errors.push(ValidationError::DuplicateParent { id });
                        }
                    }
                    _ => errors.push(ValidationError::MalformedParent {
                        value: item.as_str().map(str::to_owned).unwrap_or_else(|| item.to_string()),
                    }),
                }
            }
        }
        Some(_) => errors.push(malformed("parents", "expected an array")),
    }

    match obj.get("evidence") {
        None => {}
        Some(Value::Array(items)) => {
            for (index, item) in items.iter().enumerate() {
                check_evidence(index, item, &mut errors);
            }
        }
        Some(_) => errors.push(malformed("evidence", "expected an array")),
    }

    match obj.get("clearance") {
        None => {}
        Some(Value::Object(c)) => {
            match c.get("denied_roles") {
                Some(Value::Array(roles)) => {
                    let mut seen = HashSet::new();
                    for r in roles {
                        match r.as_str().map(str::parse::<Role>) {
                            Some(Ok(role)) => {
                                if !seen.insert(role) {
                                    errors.push(ValidationError::DuplicateRole { role });
                                }
                            }
                            _ => errors.push(ValidationError::InvalidRole {
                                value: r.as_str().map(str::to_owned).unwrap_or_else(|| r.to_string()),
                            }),
                        }
                    }
                }
                _ => errors.push(malformed("clearance.denied_roles", "expected an array")),
            }
            if !matches!(c.get("reason"), None | Some(Value::String(_))) {
                errors.push(malformed("clearance.reason", "expected a string"));
            }
        }
        Some(_) => errors.push(malformed("clearance", "expected an object")),
    }

    match obj.get("signature") {
        None => {}
        Some(Value::String(s)) if signing::decode_signature(s).is_some() => {}
        Some(_) => errors.push(ValidationError::MalformedSignature),
    }

    errors.into()
}

fn check_evidence(index: usize, item: &Value, errors: &mut Vec<ValidationError>) {
    let bad = |reason: &str| ValidationError::InvalidEvidence {
        index,
        reason: reason.to_owned(),
    };
    let Some(ev) = item.as_object() else {
        errors.push(bad("expected an object"));
        return;
    };
    match ev.get("uri") {
        Some(Value::String(s)) if !s.is_empty() => {}
        _ => errors.push(bad("uri is missing or empty")),
    }
    if !matches!(ev.get("mime_type"), Some(Value::String(_))) {
        errors.push(bad("mime_type is missing"));
    }
    match ev.get("hash").and_then(Value::as_str).map(BeadId::parse) {
        Some(Ok(_)) => {}
        _ => errors.push(bad("hash is not sha256:<64 hex>")),
    }
}

fn malformed(field: &str, reason: &str) -> ValidationError {
    ValidationError::MalformedField {
        field: field.to_owned(),
        reason: reason.to_owned(),
    }
}
