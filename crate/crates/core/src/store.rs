//! Write-once content-addressable storage of beads as flat files.
//!
//! Layout: `<data_dir>/objects/<2 hex>/<62 hex>`, one bead per file, encoded
//! as canonical JSON including `id` and `signature`. The path is the
//! authority for an object's id; every read recomputes the hash.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fs::{self, ReadDir};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bead::{signing, Bead, BeadError, BeadId, Draft, Keyring, ValidationReport};

pub const OBJECTS_DIR: &str = "objects";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("bead {0} not found")]
    NotFound(BeadId),
    #[error("parent {0} is not in the store")]
    MissingParent(BeadId),
    #[error("object {0} exists with different content")]
    StorageConflict(BeadId),
    #[error("integrity violation for {id}: {corruption}")]
    IntegrityViolation { id: BeadId, corruption: Corruption },
    #[error("invalid draft: {0}")]
    InvalidDraft(ValidationReport),
    #[error(transparent)]
    Bead(BeadError),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl From<BeadError> for StoreError {
    fn from(e: BeadError) -> Self {
        match e {
            BeadError::InvalidDraft(r) => StoreError::InvalidDraft(r),
            other => StoreError::Bead(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Why a stored object failed verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    #[error("stored bytes do not parse as a bead: {reason}")]
    Unparseable { reason: String },
    #[error("stored id field {stored:?} differs from the object path")]
    IdMismatch { stored: String },
    #[error("content hashes to {actual}")]
    HashMismatch { actual: BeadId },
    #[error("stored draft is invalid: {reason}")]
    Invalid { reason: String },
    #[error("stored bytes are not in canonical form")]
    NonCanonical,
    #[error("signature does not verify for author {author}")]
    BadSignature { author: String },
}

/// Sharded location of an object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectPath {
    pub root_dir: PathBuf,
    pub prefix: String,
    pub rest: String,
}

impl ObjectPath {
    pub fn new(root_dir: &Path, id: &BeadId) -> ObjectPath {
        let (prefix, rest) = id.shard();
        ObjectPath {
            root_dir: root_dir.to_owned(),
            prefix: prefix.to_owned(),
            rest: rest.to_owned(),
        }
    }

    pub fn shard_dir(&self) -> PathBuf {
        self.root_dir.join(OBJECTS_DIR).join(&self.prefix)
    }

    pub fn to_path_buf(&self) -> PathBuf {
        self.shard_dir().join(&self.rest)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PutReceipt {
    pub id: BeadId,
    /// False when an identical object already existed.
    pub created: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ObjectStatus {
    Intact,
    Missing,
    Corrupted { corruption: Corruption },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorruptObject {
    pub id: BeadId,
    pub corruption: Corruption,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub corrupted: Vec<CorruptObject>,
    /// Intact beads whose ancestry reaches a corrupted or missing object.
    pub broken_descendants: Vec<BeadId>,
    /// Referenced parents with no object on disk.
    pub missing: Vec<BeadId>,
}

impl VerifyReport {
    pub fn is_pristine(&self) -> bool {
        self.corrupted.is_empty() && self.broken_descendants.is_empty() && self.missing.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
    keyring: Option<Keyring>,
    durable: bool,
}

impl Store {
    /// Opens (creating if needed) the store rooted at `data_dir`.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        let root = data_dir.as_ref().to_owned();
        let objects = root.join(OBJECTS_DIR);
        fs::create_dir_all(&objects).map_err(io_err(&objects))?;
        Ok(Store {
            root,
            keyring: None,
            durable: true,
        })
    }

    /// Verify signatures of authors known to `keyring` on every read.
    pub fn with_keyring(mut self, keyring: Keyring) -> Store {
        self.keyring = Some(keyring);
        self
    }

    /// Whether object writes are fsynced before being linked into place.
    pub fn durable(mut self, durable: bool) -> Store {
        self.durable = durable;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn keyring(&self) -> Option<&Keyring> {
        self.keyring.as_ref()
    }

    pub fn object_path(&self, id: &BeadId) -> ObjectPath {
        ObjectPath::new(&self.root, id)
    }

    pub fn contains(&self, id: &BeadId) -> bool {
        self.object_path(id).to_path_buf().is_file()
    }

    /// Stores an unsigned draft.
    pub fn put(&self, draft: &Draft) -> Result<PutReceipt, StoreError> {
        self.put_signed(draft, None)
    }

    /// Stores a draft with an optional detached signature.
    ///
    /// Parents must already be stored. If the object exists and still hashes
    /// to its id, the existing file is kept untouched.
    pub fn put_signed(&self, draft: &Draft, signature: Option<String>) -> Result<PutReceipt, StoreError> {
        if let Some(sig) = &signature {
            if signing::decode_signature(sig).is_none() {
                return Err(StoreError::InvalidDraft(
                    vec![crate::bead::ValidationError::MalformedSignature].into(),
                ));
            }
        }
        let bead = Bead::seal(draft.clone(), signature)?;
        for parent in &bead.draft.parents {
            if !self.contains(parent) {
                return Err(StoreError::MissingParent(parent.clone()));
            }
        }
        let bytes = bead.to_stored_bytes()?;
        let path = self.object_path(&bead.id);
        let target = path.to_path_buf();
        if target.is_file() {
            return self.existing(bead.id);
        }

        let shard = path.shard_dir();
        fs::create_dir_all(&shard).map_err(io_err(&shard))?;
        let mut tmp = tempfile::Builder::new()
            .prefix(".tmp-")
            .tempfile_in(&shard)
            .map_err(io_err(&shard))?;
        tmp.write_all(&bytes).map_err(io_err(tmp.path()))?;
        if self.durable {
            tmp.as_file().sync_all().map_err(io_err(&target))?;
        }
        match tmp.persist_noclobber(&target) {
            Ok(_) => Ok(PutReceipt {
                id: bead.id,
                created: true,
            }),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => self.existing(bead.id),
            Err(e) => Err(StoreError::Io {
                path: target,
                source: e.error,
            }),
        }
    }

    fn existing(&self, id: BeadId) -> Result<PutReceipt, StoreError> {
        match self.get(&id) {
            Ok(_) => Ok(PutReceipt { id, created: false }),
            Err(StoreError::IntegrityViolation { .. }) => Err(StoreError::StorageConflict(id)),
            Err(e) => Err(e),
        }
    }

    pub fn read_raw(&self, id: &BeadId) -> Result<Vec<u8>, StoreError> {
        let path = self.object_path(id).to_path_buf();
        fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(id.clone()),
            _ => StoreError::Io { path, source: e },
        })
    }

    /// Loads a bead, re-verifying it against its path-derived id.
    pub fn get(&self, id: &BeadId) -> Result<Bead, StoreError> {
        let bytes = self.read_raw(id)?;
        self.decode(id, &bytes)
            .map_err(|corruption| StoreError::IntegrityViolation {
                id: id.clone(),
                corruption,
            })
    }

    /// Parses stored bytes and checks every integrity rule.
    pub fn decode(&self, id: &BeadId, bytes: &[u8]) -> Result<Bead, Corruption> {
        let bead = Bead::from_stored_bytes(bytes).map_err(|e| Corruption::Unparseable {
            reason: e.to_string(),
        })?;
        if bead.id != *id {
            return Err(Corruption::IdMismatch {
                stored: bead.id.to_string(),
            });
        }
        let actual = bead.draft.compute_id().map_err(|e| Corruption::Invalid {
            reason: e.to_string(),
        })?;
        if actual != *id {
            return Err(Corruption::HashMismatch { actual });
        }
        if bead.draft.parents.contains(id) {
            return Err(Corruption::Invalid {
                reason: "bead lists itself as a parent".into(),
            });
        }
        match bead.to_stored_bytes() {
            Ok(canonical) if canonical == bytes => {}
            _ => return Err(Corruption::NonCanonical),
        }
        if let Some(sig) = &bead.signature {
            let bad = || Corruption::BadSignature {
                author: bead.draft.author.clone(),
            };
            if signing::decode_signature(sig).is_none() {
                return Err(bad());
            }
            if let Some(key) = self.keyring.as_ref().and_then(|k| k.resolve(&bead.draft.author)) {
                if !signing::verify_draft(&bead.draft, sig, key).unwrap_or(false) {
                    return Err(bad());
                }
            }
        }
        Ok(bead)
    }

    pub fn verify_object(&self, id: &BeadId) -> Result<ObjectStatus, StoreError> {
        match self.get(id) {
            Ok(_) => Ok(ObjectStatus::Intact),
            Err(StoreError::NotFound(_)) => Ok(ObjectStatus::Missing),
            Err(StoreError::IntegrityViolation { corruption, .. }) => {
                Ok(ObjectStatus::Corrupted { corruption })
            }
            Err(e) => Err(e),
        }
    }

    /// Scans every object; reports corrupted objects and the intact beads
    /// whose ancestry reaches a corrupted or missing object.
    pub fn verify_all(&self) -> Result<VerifyReport, StoreError> {
        let mut report = VerifyReport::default();
        let mut present = HashSet::new();
        let mut intact: HashMap<BeadId, Vec<BeadId>> = HashMap::new();
        for id in self.list_object_ids()? {
            let id = id?;
            report.checked += 1;
            present.insert(id.clone());
            match self.get(&id) {
                Ok(bead) => {
                    intact.insert(id, bead.draft.parents);
                }
                Err(StoreError::IntegrityViolation { corruption, .. }) => {
                    report.corrupted.push(CorruptObject { id, corruption });
                }
                Err(e) => return Err(e),
            }
        }

        let mut children: HashMap<&BeadId, Vec<&BeadId>> = HashMap::new();
        let mut missing = BTreeSet::new();
        for (child, parents) in &intact {
            for p in parents {
                children.entry(p).or_default().push(child);
                if !present.contains(p) {
                    missing.insert(p.clone());
                }
            }
        }

        let mut broken = BTreeSet::new();
        let mut queue: VecDeque<&BeadId> = report
            .corrupted
            .iter()
            .map(|c| &c.id)
            .chain(missing.iter())
            .collect();
        while let Some(id) = queue.pop_front() {
            for &child in children.get(id).into_iter().flatten() {
                if broken.insert(child.clone()) {
                    queue.push_back(child);
                }
            }
        }

        report.corrupted.sort_by(|a, b| a.id.cmp(&b.id));
        report.broken_descendants = broken.into_iter().collect();
        report.missing = missing.into_iter().collect();
        Ok(report)
    }

    /// Every stored id exactly once, in directory order.
    pub fn list_object_ids(&self) -> Result<ObjectIds, StoreError> {
        let objects = self.root.join(OBJECTS_DIR);
        let shards = fs::read_dir(&objects).map_err(io_err(&objects))?;
        Ok(ObjectIds {
            shards,
            current: None,
        })
    }

    pub fn object_count(&self) -> Result<usize, StoreError> {
        let mut n = 0;
        for id in self.list_object_ids()? {
            id?;
            n += 1;
        }
        Ok(n)
    }
}

/// Lazy walk over the sharded objects directory.
pub struct ObjectIds {
    shards: ReadDir,
    current: Option<(String, PathBuf, ReadDir)>,
}

fn is_lower_hex(s: &str, len: usize) -> bool {
    s.len() == len && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl Iterator for ObjectIds {
    type Item = Result<BeadId, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some((prefix, dir, entries)) = &mut self.current {
                match entries.next() {
                    Some(Ok(entry)) => {
                        let name = entry.file_name();
                        let Some(name) = name.to_str() else { continue };
                        // Skips temp files and anything else not shaped like an object.
                        if !is_lower_hex(name, 62) {
                            continue;
                        }
                        return Some(
                            BeadId::from_shard(prefix, name).map_err(|e| StoreError::Io {
                                path: dir.join(name),
                                source: io::Error::new(io::ErrorKind::InvalidData, e),
                            }),
                        );
                    }
                    Some(Err(e)) => return Some(Err(io_err(dir)(e))),
                    None => self.current = None,
                }
            }
            match self.shards.next()? {
                Ok(entry) => {
                    let name = entry.file_name();
                    let Some(prefix) = name.to_str().filter(|n| is_lower_hex(n, 2)) else {
                        continue;
                    };
                    let dir = entry.path();
                    match fs::read_dir(&dir) {
                        Ok(rd) => self.current = Some((prefix.to_owned(), dir, rd)),
                        Err(e) if e.kind() == io::ErrorKind::NotADirectory => continue,
                        Err(e) => return Some(Err(io_err(&dir)(e))),
                    }
                }
                Err(e) => return Some(Err(io_err(&PathBuf::from(OBJECTS_DIR))(e))),
            }
        }
    }
}
