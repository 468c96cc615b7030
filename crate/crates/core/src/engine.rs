//! The object store and its index behind one handle.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bead::{Bead, BeadId, Draft, Keyring, Role};
use crate::index::{Edge, Index, IndexError, IndexRecord, RebuildStats, INDEX_FILE, PATIENT_ROOT_TYPE};
use crate::store::{PutReceipt, Store, StoreError, VerifyReport};
use crate::traversal::{self, CausalGraph, ContextResult, Direction, TraversalError};
use crate::Error;

pub const KEYRING_FILE: &str = "keyring.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Largest depth a context query may ask for.
    pub max_depth: u32,
    /// Depth used when a caller gives none.
    pub default_depth: u32,
    /// Fsync object files before linking them into place.
    pub durable: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_depth: 100,
            default_depth: 5,
            durable: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientSummary {
    pub id: BeadId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub timestamp: String,
    /// Beads in the patient's record, root included.
    pub bead_count: usize,
}

/// All beads descending from a patient root, root first then chronological.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient: BeadId,
    pub beads: Vec<Bead>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecordQuery {
    pub include_administrative: bool,
    pub role: Option<Role>,
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub object_count: usize,
    pub index_records: usize,
    pub index_ok: bool,
}

#[derive(Debug)]
pub struct Engine {
    store: Store,
    index: Index,
    config: EngineConfig,
}

impl Engine {
    /// Opens the store under `data_dir`. A keyring at `<data_dir>/keyring.json`
    /// enables signature checks on read. An unreadable index file is discarded
    /// and recreated empty; call [`Engine::ensure_index`] to repopulate it.
    pub fn open(data_dir: impl AsRef<Path>, config: EngineConfig) -> Result<Engine, Error> {
        let dir = data_dir.as_ref();
        let mut store = Store::open(dir)?.durable(config.durable);
        let keyring_path = dir.join(KEYRING_FILE);
        if keyring_path.is_file() {
            let keyring = Keyring::load(&keyring_path).map_err(|source| StoreError::Io {
                path: keyring_path.clone(),
                source,
            })?;
            store = store.with_keyring(keyring);
        }
        let index_path = dir.join(INDEX_FILE);
        let index = match Index::open(&index_path) {
            Ok(index) => index,
            Err(IndexError::Sqlite(e)) => {
                tracing::warn!(error = %e, "index unreadable, recreating");
                remove_index_files(&index_path)?;
                Index::open(&index_path)?
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Engine {
            store,
            index,
            config,
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Rebuilds the index if it is empty while objects exist.
    pub fn ensure_index(&self) -> Result<Option<RebuildStats>, Error> {
        if self.index.record_count()? == 0 && self.store.list_object_ids()?.next().is_some() {
            return self.reindex().map(Some);
        }
        Ok(None)
    }

    pub fn put(&self, draft: &Draft) -> Result<PutReceipt, Error> {
        self.put_signed(draft, None)
    }

    pub fn put_signed(&self, draft: &Draft, signature: Option<String>) -> Result<PutReceipt, Error> {
        let receipt = self.store.put_signed(draft, signature.clone())?;
        let bead = Bead {
            id: receipt.id.clone(),
            draft: draft.clone(),
            signature,
        };
        self.index.index_bead(&bead)?;
        Ok(receipt)
    }

    /// Validates and stores a raw JSON draft (optionally carrying `signature`).
    pub fn submit(&self, doc: &Value) -> Result<PutReceipt, Error> {
        let draft = Draft::from_document(doc).map_err(Error::Validation)?;
        let signature = doc
            .get("signature")
            .and_then(Value::as_str)
            .map(str::to_owned);
        self.put_signed(&draft, signature)
    }

    pub fn get(&self, id: &BeadId) -> Result<Bead, Error> {
        Ok(self.store.get(id)?)
    }

    pub fn get_context(&self, id: &BeadId, depth: Option<u32>, role: Option<Role>) -> Result<ContextResult, Error> {
        let depth = depth.unwrap_or(self.config.default_depth);
        Ok(traversal::get_context(self, id, depth, role, self.config.max_depth)?)
    }

    pub fn get_descendants(&self, id: &BeadId, depth: Option<u32>, role: Option<Role>) -> Result<ContextResult, Error> {
        let depth = depth.unwrap_or(self.config.default_depth);
        Ok(traversal::get_descendants(self, id, depth, role, self.config.max_depth)?)
    }

    fn require_patient_root(&self, id: &BeadId) -> Result<IndexRecord, Error> {
        match self.index.record(id)? {
            Some(r) if r.kind == PATIENT_ROOT_TYPE && r.is_root => Ok(r),
            _ => Err(Error::NotPatientRoot(id.clone())),
        }
    }

    /// Full descendant set of a patient root (unbounded depth).
    pub fn patient_record(&self, id: &BeadId, query: RecordQuery) -> Result<PatientRecord, Error> {
        self.require_patient_root(id)?;
        let root = self.store.get(id)?;
        let (result, _) = traversal::traverse(self, id, Direction::Descendants, None)?;
        let mut beads: Vec<Bead> = std::iter::once(root)
            .chain(result.beads)
            .filter(|b| query.include_administrative || !b.draft.is_administrative())
            .filter(|b| query.role.is_none_or(|r| b.draft.visible_to(r)))
            .collect();
        if let Some(limit) = query.limit {
            beads.truncate(limit);
        }
        let edges = traversal::induced_edges(&beads);
        Ok(PatientRecord {
            patient: id.clone(),
            beads,
            edges,
        })
    }

    pub fn patients(&self) -> Result<Vec<PatientSummary>, Error> {
        self.index
            .patient_roots()?
            .into_iter()
            .filter(|r| r.is_root)
            .map(|r| {
                let root = self.store.get(&r.id)?;
                let (desc, _) = traversal::traverse(self, &r.id, Direction::Descendants, None)?;
                Ok(PatientSummary {
                    name: root.draft.content.get("name").and_then(Value::as_str).map(str::to_owned),
                    id: r.id,
                    timestamp: r.timestamp,
                    bead_count: desc.beads.len() + 1,
                })
            })
            .collect()
    }

    pub fn reindex(&self) -> Result<RebuildStats, Error> {
        Ok(self.index.reindex(&self.store)?)
    }

    pub fn verify_all(&self) -> Result<VerifyReport, Error> {
        Ok(self.store.verify_all()?)
    }

    pub fn health(&self) -> Result<Health, Error> {
        let object_count = self.store.object_count()?;
        let index_records = self.index.record_count()?;
        Ok(Health {
            status: "ok",
            object_count,
            index_records,
            index_ok: index_records == object_count,
        })
    }
}

fn remove_index_files(path: &Path) -> Result<(), Error> {
    for suffix in ["", "-wal", "-shm"] {
        let mut p = path.as_os_str().to_owned();
        p.push(suffix);
        let p = PathBuf::from(p);
        match fs::remove_file(&p) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(StoreError::Io { path: p, source }.into()),
        }
    }
    Ok(())
}

/// Deletes the index file and its WAL side files.
pub fn delete_index(data_dir: impl AsRef<Path>) -> Result<(), Error> {
    remove_index_files(&data_dir.as_ref().join(INDEX_FILE))
}

impl CausalGraph for Engine {
    fn parents_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError> {
        self.index.parents_of(id).map_err(not_found)
    }

    fn children_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError> {
        self.index.children_of(id).map_err(not_found)
    }

    fn load(&self, id: &BeadId) -> Result<Bead, TraversalError> {
        self.store.get(id).map_err(|e| match e {
            StoreError::NotFound(id) => TraversalError::NotFound(id),
            other => TraversalError::Store(other),
        })
    }
}

fn not_found(e: IndexError) -> TraversalError {
    match e {
        IndexError::NotFound(id) => TraversalError::NotFound(id),
        other => TraversalError::Index(other),
    }
}
