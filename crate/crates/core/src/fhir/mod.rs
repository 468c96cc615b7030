//! Conversion of FHIR R4 bundles (Synthea-style, one patient per bundle)
//! into causally linked bead graphs.
//!
//! Resources are converted in dependency order so every parent exists before
//! its children: Patient, Encounters, Conditions, other encounter-scoped
//! resources, MedicationRequests, then administrative resources. References
//! that fail to resolve are counted and the bead is attached to the patient
//! root instead, which keeps every converted bead reachable from the root.

mod mapping;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

pub use mapping::{
    bead_type_for, dependency_rank, is_administrative, map_resource, normalize_timestamp, MapError, MappedDraft,
    Mapping, RefMap, ADMINISTRATIVE_TYPES, BRIDGE_AUTHOR, CLINICAL_TYPES,
};

use crate::bead::BeadId;
use crate::engine::Engine;

#[derive(Debug, thiserror::Error)]
pub enum FhirError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {reason}")]
    NotABundle { path: PathBuf, reason: String },
    #[error("bundle has no Patient resource")]
    NoPatient,
    #[error("bundle has {0} Patient resources; expected exactly one")]
    MultiplePatients(usize),
    #[error("cannot convert patient: {0}")]
    Patient(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FhirEntry {
    pub full_url: Option<String>,
    pub resource: Value,
}

impl FhirEntry {
    pub fn resource_type(&self) -> &str {
        self.resource["resourceType"].as_str().unwrap_or_default()
    }

    pub fn id(&self) -> &str {
        self.resource["id"].as_str().unwrap_or_default()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FhirBundle {
    pub source_file: Option<PathBuf>,
    pub entries: Vec<FhirEntry>,
}

impl FhirBundle {
    /// Parses bundle JSON. Every entry must carry a resource with string
    /// `resourceType` and `id`.
    pub fn from_json(text: &str, source_file: Option<&Path>) -> Result<FhirBundle, FhirError> {
        let path = source_file.map(Path::to_path_buf).unwrap_or_default();
        let doc: Value = serde_json::from_str(text).map_err(|e| FhirError::Parse {
            path: path.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let bad = |reason: String| FhirError::NotABundle {
            path: path.clone(),
            reason,
        };
        if doc.get("resourceType").and_then(Value::as_str) != Some("Bundle") {
            return Err(bad("resourceType is not Bundle".into()));
        }
        let raw = match doc.get("entry") {
            None => Vec::new(),
            Some(Value::Array(a)) => a.clone(),
            Some(_) => return Err(bad("entry is not an array".into())),
        };
        let entries = raw
            .into_iter()
            .enumerate()
            .map(|(i, mut e)| {
                let resource = e.get_mut("resource").map(Value::take).unwrap_or(Value::Null);
                for field in ["resourceType", "id"] {
                    if !resource.get(field).is_some_and(Value::is_string) {
                        return Err(bad(format!("entry {i} has no resource {field}")));
                    }
                }
                Ok(FhirEntry {
                    full_url: e.get("fullUrl").and_then(Value::as_str).map(str::to_owned),
                    resource,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(FhirBundle {
            source_file: source_file.map(Path::to_path_buf),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<FhirBundle, FhirError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FhirError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    FhirBundle::from_json(&text, Some(path))
}

/// Expands a path into bundle files: a file is returned as is, a directory
/// yields its `*.json` files in name order.
pub fn bundle_paths(path: impl AsRef<Path>) -> Result<Vec<PathBuf>, FhirError> {
    let path = path.as_ref();
    let io = |source| FhirError::Io {
        path: path.to_path_buf(),
        source,
    };
    let meta = fs::metadata(path).map_err(io)?;
    if !meta.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TypeStats {
    pub total: usize,
    pub converted: usize,
    pub filtered: usize,
    pub skipped: usize,
    pub failed: usize,
    pub dangling_references: usize,
}

impl TypeStats {
    fn add(&mut self, other: &TypeStats) {
        self.total += other.total;
        self.converted += other.converted;
        self.filtered += other.filtered;
        self.skipped += other.skipped;
        self.failed += other.failed;
        self.dangling_references += other.dangling_references;
    }
}

/// Outcome counts per resource type. `converted` counts clinical beads
/// (the patient root included), `filtered` administrative beads, `skipped`
/// unsupported types, `failed` resources that could not be stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConversionStats {
    pub by_type: BTreeMap<String, TypeStats>,
    /// Objects newly written; zero when re-ingesting the same bundle.
    pub created: usize,
}

impl ConversionStats {
    pub fn totals(&self) -> TypeStats {
        let mut t = TypeStats::default();
        for s in self.by_type.values() {
            t.add(s);
        }
        t
    }

    fn entry(&mut self, resource_type: &str) -> &mut TypeStats {
        self.by_type.entry(resource_type.to_owned()).or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conversion {
    pub root: BeadId,
    pub source_file: Option<PathBuf>,
    pub stats: ConversionStats,
    /// Per-resource failures as `Type/id: reason`.
    pub errors: Vec<String>,
}

/// Converts one single-patient bundle into beads stored through `engine`.
pub fn convert_bundle(bundle: &FhirBundle, engine: &Engine) -> Result<Conversion, FhirError> {
    let patients = bundle
        .entries
        .iter()
        .filter(|e| e.resource_type() == "Patient")
        .count();
    match patients {
        0 => return Err(FhirError::NoPatient),
        1 => {}
        n => return Err(FhirError::MultiplePatients(n)),
    }

    let mut order: Vec<&FhirEntry> = bundle.entries.iter().collect();
    order.sort_by_key(|e| dependency_rank(e.resource_type()));

    let mut refs = RefMap::new();
    let mut stats = ConversionStats::default();
    let mut errors = Vec::new();
    for entry in order {
        let rt = entry.resource_type();
        stats.entry(rt).total += 1;
        let mapping = match map_resource(&entry.resource, &refs) {
            Ok(m) => m,
            Err(e) if rt == "Patient" => return Err(FhirError::Patient(e.to_string())),
            Err(e) => {
                stats.entry(rt).failed += 1;
                errors.push(format!("{rt}/{}: {e}", entry.id()));
                continue;
            }
        };
        let (mapped, administrative) = match mapping {
            Mapping::Unsupported => {
                stats.entry(rt).skipped += 1;
                continue;
            }
            Mapping::Clinical(m) => (m, false),
            Mapping::Administrative(m) => (m, true),
        };
        let receipt = match engine.put(&mapped.draft) {
            Ok(r) => r,
            Err(e) if rt == "Patient" => return Err(FhirError::Patient(e.to_string())),
            Err(e) => {
                stats.entry(rt).failed += 1;
                errors.push(format!("{rt}/{}: {e}", entry.id()));
                continue;
            }
        };
        let s = stats.entry(rt);
        s.dangling_references += mapped.dangling.len();
        if administrative {
            s.filtered += 1;
        } else {
            s.converted += 1;
        }
        if receipt.created {
            stats.created += 1;
        }
        refs.insert(entry.full_url.as_deref(), rt, entry.id(), receipt.id.clone());
        match rt {
            "Patient" => refs.set_root(receipt.id, mapped.draft.timestamp),
            "Encounter" => refs.record_encounter_start(receipt.id, mapped.draft.timestamp),
            _ => {}
        }
    }
    let root = refs.root().cloned().ok_or(FhirError::NoPatient)?;
    Ok(Conversion {
        root,
        source_file: bundle.source_file.clone(),
        stats,
        errors,
    })
}

/// Line-oriented rendering used by the CLI.
pub fn render_stats(conversion: &Conversion) -> String {
    let mut out = String::new();
    let src = conversion
        .source_file
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "-".into());
    out.push_str(&format!("bundle {src}\n"));
    out.push_str(&format!("root {}\n", conversion.root));
    for (rt, s) in &conversion.stats.by_type {
        out.push_str(&format!(
            "  {rt} total={} converted={} filtered={} skipped={} failed={} dangling={}\n",
            s.total, s.converted, s.filtered, s.skipped, s.failed, s.dangling_references
        ));
    }
    let t = conversion.stats.totals();
    out.push_str(&format!(
        "total entries={} converted={} filtered={} skipped={} failed={} dangling={} created={}\n",
        t.total, t.converted, t.filtered, t.skipped, t.failed, t.dangling_references, conversion.stats.created
    ));
    for e in &conversion.errors {
        out.push_str(&format!("  error {e}\n"));
    }
    out
}
