//! Per-resource conversion rules.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use crate::bead::{parse_timestamp, BeadId, Draft};
use crate::index::PATIENT_ROOT_TYPE;

/// Author recorded on every bead produced by the bridge.
pub const BRIDGE_AUTHOR: &str = "did:medbeads:bridge:synthea";

/// Resource types kept in the DAG but hidden from clinical timelines.
pub const ADMINISTRATIVE_TYPES: [&str; 7] = [
    "Claim",
    "ExplanationOfBenefit",
    "CarePlan",
    "CareTeam",
    "Device",
    "SupplyDelivery",
    "Provenance",
];

/// Resource type to bead type for clinical resources.
pub const CLINICAL_TYPES: [(&str, &str); 10] = [
    ("Patient", PATIENT_ROOT_TYPE),
    ("Encounter", "fhir_encounter"),
    ("Condition", "fhir_condition"),
    ("Observation", "fhir_observation"),
    ("MedicationRequest", "fhir_medicationrequest"),
    ("DiagnosticReport", "fhir_diagnosticreport"),
    ("Procedure", "fhir_procedure"),
    ("Immunization", "fhir_immunization"),
    ("ImagingStudy", "fhir_imagingstudy"),
    ("DocumentReference", "fhir_documentreference"),
];

pub fn bead_type_for(resource_type: &str) -> Option<&'static str> {
    if let Some((_, t)) = CLINICAL_TYPES.iter().find(|(r, _)| *r == resource_type) {
        return Some(t);
    }
    ADMINISTRATIVE_TYPES
        .contains(&resource_type)
        .then_some("fhir_administrative")
}

pub fn is_administrative(resource_type: &str) -> bool {
    ADMINISTRATIVE_TYPES.contains(&resource_type)
}

/// Conversion order: lower ranks go first so parents always exist before
/// their children. Ties keep bundle order.
pub fn dependency_rank(resource_type: &str) -> u8 {
    match resource_type {
        "Patient" => 0,
        "Encounter" => 1,
        "Condition" => 2,
        "Observation" | "Procedure" | "Immunization" | "ImagingStudy" | "DiagnosticReport"
        | "DocumentReference" => 3,
        "MedicationRequest" => 4,
        t if is_administrative(t) => 5,
        _ => 6,
    }
}

/// Resolves FHIR reference strings to bead ids for one bundle.
#[derive(Clone, Debug, Default)]
pub struct RefMap {
    refs: HashMap<String, BeadId>,
    root: Option<(BeadId, String)>,
    encounter_starts: HashMap<BeadId, String>,
}

impl RefMap {
    pub fn new() -> RefMap {
        RefMap::default()
    }

    /// Registers every spelling a resource can be referenced by: its
    /// `fullUrl`, `Type/id`, and `urn:uuid:id`.
    pub fn insert(&mut self, full_url: Option<&str>, resource_type: &str, id: &str, bead: BeadId) {
        if let Some(url) = full_url {
            self.refs.insert(url.to_owned(), bead.clone());
        }
        self.refs.insert(format!("{resource_type}/{id}"), bead.clone());
        self.refs.insert(format!("urn:uuid:{id}"), bead);
    }

    pub fn resolve(&self, reference: &str) -> Option<&BeadId> {
        self.refs.get(reference).or_else(|| {
            // Absolute URLs ending in Type/id
            let mut parts = reference.rsplitn(3, '/');
            let id = parts.next()?;
            let ty = parts.next()?;
            self.refs.get(&format!("{ty}/{id}"))
        })
    }

    pub fn set_root(&mut self, id: BeadId, timestamp: String) {
        self.root = Some((id, timestamp));
    }

    pub fn root(&self) -> Option<&BeadId> {
        self.root.as_ref().map(|(id, _)| id)
    }

    pub fn record_encounter_start(&mut self, encounter: BeadId, start: String) {
        self.encounter_starts.insert(encounter, start);
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappedDraft {
    pub draft: Draft,
    /// References that named a parent but did not resolve.
    pub dangling: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mapping {
    Clinical(MappedDraft),
    Administrative(MappedDraft),
    Unsupported,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("resource has no resourceType")]
    MissingResourceType,
    #[error("patient has no usable birthDate")]
    MissingBirthDate,
    #[error("patient root must be converted first")]
    NoRoot,
}

fn at<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| match key.parse::<usize>() {
        Ok(i) => cur.get(i),
        Err(_) => cur.get(key),
    })
}

fn text_at(v: &Value, path: &str) -> Option<String> {
    at(v, path).and_then(Value::as_str).map(str::to_owned)
}

/// `text`, else the first coding's display, else its code.
fn concept_text(concept: Option<&Value>) -> Option<String> {
    let c = concept?;
    text_at(c, "text")
        .or_else(|| text_at(c, "coding.0.display"))
        .or_else(|| text_at(c, "coding.0.code"))
}

fn concept_code(concept: Option<&Value>) -> Option<String> {
    let c = concept?;
    text_at(c, "coding.0.code").or_else(|| text_at(c, "text"))
}

/// Accepts RFC 3339 instants and bare `YYYY-MM-DD` dates (read as UTC midnight).
pub fn normalize_timestamp(raw: &str) -> Option<String> {
    if parse_timestamp(raw).is_some() {
        return Some(raw.to_owned());
    }
    chrono::NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .map(|d| format!("{}T00:00:00Z", d.format("%Y-%m-%d")))
}

fn timestamp_fields(resource_type: &str) -> &'static [&'static str] {
    match resource_type {
        "Encounter" => &["period.start", "period.end"],
        "Condition" => &["onsetDateTime", "recordedDate", "onsetPeriod.start", "abatementDateTime"],
        "Observation" => &["effectiveDateTime", "effectivePeriod.start", "issued"],
        "MedicationRequest" => &["authoredOn", "dispenseRequest.validityPeriod.start"],
        "DiagnosticReport" => &["effectiveDateTime", "effectivePeriod.start", "issued"],
        "Procedure" => &["performedDateTime", "performedPeriod.start"],
        "Immunization" => &["occurrenceDateTime", "recorded"],
        "ImagingStudy" => &["started"],
        "DocumentReference" => &["date", "context.period.start"],
        "Claim" | "ExplanationOfBenefit" => &["created", "billablePeriod.start"],
        "CarePlan" | "CareTeam" => &["period.start"],
        "SupplyDelivery" => &["occurrenceDateTime"],
        "Provenance" => &["recorded"],
        _ => &[],
    }
}

/// The encounter a resource belongs to, if it names one.
fn encounter_reference(resource: &Value) -> Option<String> {
    text_at(resource, "encounter.reference")
        .or_else(|| text_at(resource, "context.encounter.0.reference"))
        .or_else(|| {
            let items = at(resource, "item")?.as_array()?;
            items
                .iter()
                .find_map(|item| text_at(item, "encounter.0.reference"))
        })
}

struct Parents<'a> {
    refs: &'a RefMap,
    root: BeadId,
    ids: Vec<BeadId>,
    dangling: Vec<String>,
}

impl<'a> Parents<'a> {
    fn add(&mut self, reference: &str) -> Option<BeadId> {
        match self.refs.resolve(reference) {
            Some(id) => {
                if !self.ids.contains(id) {
                    self.ids.push(id.clone());
                }
                Some(id.clone())
            }
            None => {
                self.dangling.push(reference.to_owned());
                None
            }
        }
    }

    fn finish(mut self) -> (Vec<BeadId>, Vec<String>) {
        if self.ids.is_empty() {
            self.ids.push(self.root);
        }
        (self.ids, self.dangling)
    }
}

/// Converts one resource given the references resolved so far.
pub fn map_resource(resource: &Value, refs: &RefMap) -> Result<Mapping, MapError> {
    let rt = resource
        .get("resourceType")
        .and_then(Value::as_str)
        .ok_or(MapError::MissingResourceType)?;
    let Some(bead_type) = bead_type_for(rt) else {
        return Ok(Mapping::Unsupported);
    };
    let mut content = Map::new();
    content.insert("resource_type".into(), json!(rt));
    if let Some(id) = resource.get("id") {
        content.insert("fhir_id".into(), id.clone());
    }

    if rt == "Patient" {
        let birth = text_at(resource, "birthDate")
            .and_then(|d| normalize_timestamp(&d))
            .ok_or(MapError::MissingBirthDate)?;
        extract_patient(resource, &mut content);
        content.insert("timestamp_source".into(), json!("birthDate"));
        content.insert("fhir".into(), resource.clone());
        let draft = Draft::new(bead_type, birth, BRIDGE_AUTHOR).with_content(Value::Object(content));
        return Ok(Mapping::Clinical(MappedDraft {
            draft,
            dangling: Vec::new(),
        }));
    }

    let (root, root_ts) = refs.root.clone().ok_or(MapError::NoRoot)?;
    let mut parents = Parents {
        refs,
        root,
        ids: Vec::new(),
        dangling: Vec::new(),
    };
    let mut encounter = None;
    match rt {
        "Encounter" => {
            if let Some(r) = text_at(resource, "subject.reference") {
                parents.add(&r);
            }
        }
        "Immunization" => {
            if let Some(r) = text_at(resource, "patient.reference") {
                parents.add(&r);
            }
        }
        _ => {
            if let Some(r) = encounter_reference(resource) {
                encounter = parents.add(&r);
            }
            if rt == "MedicationRequest" {
                for reason in at(resource, "reasonReference")
                    .and_then(Value::as_array)
                    .into_iter()
                    .flatten()
                {
                    if let Some(r) = text_at(reason, "reference") {
                        parents.add(&r);
                    }
                }
            }
        }
    }
    let (parent_ids, dangling) = parents.finish();

    let found = timestamp_fields(rt).iter().find_map(|field| {
        text_at(resource, field)
            .and_then(|raw| normalize_timestamp(&raw))
            .map(|ts| (ts, (*field).to_owned()))
    });
    let (timestamp, source) = found
        .or_else(|| {
            let start = refs.encounter_starts.get(encounter.as_ref()?)?;
            Some((start.clone(), "encounter".to_owned()))
        })
        .unwrap_or_else(|| (root_ts, "patient_root".to_owned()));
    content.insert("timestamp_source".into(), json!(source));

    let administrative = is_administrative(rt);
    if administrative {
        content.insert("administrative".into(), json!(true));
    } else {
        extract_clinical(rt, resource, &mut content);
    }
    content.insert("fhir".into(), resource.clone());

    let draft = Draft::new(bead_type, timestamp, BRIDGE_AUTHOR)
        .with_parents(parent_ids)
        .with_content(Value::Object(content));
    let mapped = MappedDraft { draft, dangling };
    Ok(if administrative {
        Mapping::Administrative(mapped)
    } else {
        Mapping::Clinical(mapped)
    })
}

fn put_opt(content: &mut Map<String, Value>, key: &str, value: Option<impl Into<Value>>) {
    if let Some(v) = value {
        content.insert(key.into(), v.into());
    }
}

fn extract_patient(r: &Value, c: &mut Map<String, Value>) {
    let given: Vec<&str> = at(r, "name.0.given")
        .and_then(Value::as_array)
        .map(|g| g.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    let family = text_at(r, "name.0.family");
    let name: Vec<&str> = given.into_iter().chain(family.as_deref()).collect();
    if !name.is_empty() {
        c.insert("name".into(), json!(name.join(" ")));
    }
    put_opt(c, "gender", text_at(r, "gender"));
    put_opt(c, "birth_date", text_at(r, "birthDate"));
}

fn extract_clinical(rt: &str, r: &Value, c: &mut Map<String, Value>) {
    match rt {
        "Encounter" => {
            put_opt(c, "encounter_type", text_at(r, "class.code"));
            put_opt(c, "description", concept_text(at(r, "type.0")));
        }
        "Condition" => {
            put_opt(c, "condition_name", concept_text(at(r, "code")));
            put_opt(c, "clinical_status", concept_code(at(r, "clinicalStatus")));
        }
        "Observation" => {
            put_opt(c, "observation_name", concept_text(at(r, "code")));
            if let Some(q) = at(r, "valueQuantity") {
                put_opt(c, "value", q.get("value").cloned());
                put_opt(c, "unit", text_at(q, "unit").or_else(|| text_at(q, "code")));
            } else if let Some(v) = concept_text(at(r, "valueCodeableConcept")) {
                c.insert("value".into(), json!(v));
            } else {
                put_opt(c, "value", text_at(r, "valueString"));
            }
            put_opt(c, "interpretation", concept_code(at(r, "interpretation.0")));
        }
        "MedicationRequest" => {
            put_opt(
                c,
                "medication",
                concept_text(at(r, "medicationCodeableConcept")).or_else(|| text_at(r, "medicationReference.display")),
            );
            if let Some(instructions) = at(r, "dosageInstruction").and_then(Value::as_array) {
                let texts: Vec<&str> = instructions.iter().filter_map(|d| d.get("text")?.as_str()).collect();
                let dosage = if texts.len() == instructions.len() && !texts.is_empty() {
                    json!(texts.join("; "))
                } else {
                    Value::Array(instructions.clone())
                };
                c.insert("dosage".into(), dosage);
            }
        }
        "DiagnosticReport" => put_opt(c, "report_name", concept_text(at(r, "code"))),
        "Procedure" => {
            put_opt(c, "procedure_name", concept_text(at(r, "code")));
            put_opt(c, "outcome", concept_text(at(r, "outcome")));
        }
        "Immunization" => put_opt(c, "vaccine", concept_text(at(r, "vaccineCode"))),
        "ImagingStudy" => {
            put_opt(c, "modality", text_at(r, "series.0.modality.code"));
            put_opt(c, "body_site", text_at(r, "series.0.bodySite.display"));
        }
        "DocumentReference" => put_opt(c, "document_type", concept_text(at(r, "type"))),
        _ => {}
    }
}
