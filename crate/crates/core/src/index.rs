//! Rebuildable metadata index over the object store.
//!
//! The index is a cache: it holds one record per bead and its child→parent
//! edges so traversal can look up neighbours without scanning objects. It
//! can be deleted at any time and rebuilt with [`Index::reindex`].

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::bead::{parse_timestamp, Bead, BeadId};
use crate::store::{Store, StoreError};

pub const INDEX_FILE: &str = "index.db";
pub const PATIENT_ROOT_TYPE: &str = "patient_registration";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS beads (
    id        TEXT PRIMARY KEY,
    type      TEXT NOT NULL,
    timestamp TEXT NOT NULL,
    sort_key  TEXT NOT NULL,
    author    TEXT NOT NULL,
    is_root   INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS bead_edges (
    child    TEXT NOT NULL,
    parent   TEXT NOT NULL,
    position INTEGER NOT NULL,
    PRIMARY KEY (child, position)
);
CREATE INDEX IF NOT EXISTS bead_edges_parent ON bead_edges (parent);
CREATE INDEX IF NOT EXISTS beads_type ON beads (type, sort_key, id);
";

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("bead {0} is not indexed")]
    NotFound(BeadId),
    #[error("bead {id} has an unparseable timestamp {timestamp:?}")]
    BadTimestamp { id: BeadId, timestamp: String },
    #[error("index database error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("corrupt index row: {0}")]
    CorruptRow(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub child: BeadId,
    pub parent: BeadId,
}

/// Metadata summary of one stored bead.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexRecord {
    pub id: BeadId,
    #[serde(rename = "type")]
    pub kind: String,
    pub timestamp: String,
    pub author: String,
    pub is_root: bool,
}

impl IndexRecord {
    pub fn of(bead: &Bead) -> IndexRecord {
        IndexRecord {
            id: bead.id.clone(),
            kind: bead.draft.kind.clone(),
            timestamp: bead.draft.timestamp.clone(),
            author: bead.draft.author.clone(),
            is_root: bead.draft.parents.is_empty(),
        }
    }

    pub fn instant(&self) -> Option<DateTime<Utc>> {
        parse_timestamp(&self.timestamp)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RebuildStats {
    pub objects_scanned: usize,
    pub records_written: usize,
    pub edges_written: usize,
    pub skipped_corrupted: usize,
    #[serde(serialize_with = "as_millis")]
    pub duration: Duration,
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_millis())
}

/// UTC instant rendered so that string order equals chronological order.
fn sort_key(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.9fZ").to_string()
}

pub struct Index {
    conn: Mutex<Connection>,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for Index {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Index").field("path", &self.path).finish()
    }
}

fn parse_id(s: String) -> Result<BeadId, IndexError> {
    BeadId::parse(&s).map_err(|e| IndexError::CorruptRow(e.to_string()))
}

impl Index {
    pub fn open(path: impl AsRef<Path>) -> Result<Index, IndexError> {
        let path = path.as_ref().to_owned();
        let conn = Connection::open(&path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Index::init(conn, Some(path))
    }

    pub fn open_in_memory() -> Result<Index, IndexError> {
        Index::init(Connection::open_in_memory()?, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Index, IndexError> {
        conn.execute_batch(SCHEMA)?;
        // Fails fast on a file that is not a usable index.
        conn.query_row("SELECT count(*) FROM beads", [], |r| r.get::<_, i64>(0))?;
        Ok(Index {
            conn: Mutex::new(conn),
            path,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Records a bead and its parent edges. Idempotent.
    pub fn index_bead(&self, bead: &Bead) -> Result<(), IndexError> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        insert_bead(&tx, bead)?;
        tx.commit()?;
        Ok(())
    }

    pub fn record(&self, id: &BeadId) -> Result<Option<IndexRecord>, IndexError> {
        let conn = self.conn();
        let row = conn
            .query_row(
                "SELECT id, type, timestamp, author, is_root FROM beads WHERE id = ?1",
                [id.as_str()],
                read_record_row,
            )
            .optional()?;
        row.map(finish_record).transpose()
    }

    pub fn contains(&self, id: &BeadId) -> Result<bool, IndexError> {
        let conn = self.conn();
        let n: i64 = conn.query_row("SELECT count(*) FROM beads WHERE id = ?1", [id.as_str()], |r| {
            r.get(0)
        })?;
        Ok(n > 0)
    }

    /// Parents in the order the bead lists them.
    pub fn parents_of(&self, id: &BeadId) -> Result<Vec<BeadId>, IndexError> {
        let conn = self.conn();
        require(&conn, id)?;
        let mut stmt =
            conn.prepare_cached("SELECT parent FROM bead_edges WHERE child = ?1 ORDER BY position")?;
        let rows = stmt.query_map([id.as_str()], |r| r.get::<_, String>(0))?;
        rows.map(|r| parse_id(r?)).collect()
    }

    /// Children sorted by (timestamp, id) ascending.
    pub fn children_of(&self, id: &BeadId) -> Result<Vec<BeadId>, IndexError> {
        let conn = self.conn();
        require(&conn, id)?;
        let mut stmt = conn.prepare_cached(
            "SELECT b.id FROM bead_edges e JOIN beads b ON b.id = e.child
             WHERE e.parent = ?1 ORDER BY b.sort_key, b.id",
        )?;
        let rows = stmt.query_map([id.as_str()], |r| r.get::<_, String>(0))?;
        rows.map(|r| parse_id(r?)).collect()
    }

    /// All `patient_registration` records, oldest first.
    pub fn patient_roots(&self) -> Result<Vec<IndexRecord>, IndexError> {
        let conn = self.conn();
        let mut stmt = conn.prepare_cached(
            "SELECT id, type, timestamp, author, is_root FROM beads
             WHERE type = ?1 ORDER BY sort_key, id",
        )?;
        let rows = stmt.query_map([PATIENT_ROOT_TYPE], read_record_row)?;
        rows.map(|r| finish_record(r?)).collect()
    }

    pub fn record_count(&self) -> Result<usize, IndexError> {
        let conn = self.conn();
        let n: i64 = conn.query_row("SELECT count(*) FROM beads", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    pub fn edge_count(&self) -> Result<usize, IndexError> {
        let conn = self.conn();
        let n: i64 = conn.query_row("SELECT count(*) FROM bead_edges", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Edges whose parent has no record.
    pub fn dangling_edges(&self) -> Result<Vec<Edge>, IndexError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT child, parent FROM bead_edges
             WHERE parent NOT IN (SELECT id FROM beads) ORDER BY child, position",
        )?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
        rows.map(|r| {
            let (c, p) = r?;
            Ok(Edge {
                child: parse_id(c)?,
                parent: parse_id(p)?,
            })
        })
        .collect()
    }

    pub fn all_ids(&self) -> Result<Vec<BeadId>, IndexError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id FROM beads ORDER BY id")?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        rows.map(|r| parse_id(r?)).collect()
    }

    pub fn clear(&self) -> Result<(), IndexError> {
        self.conn().execute_batch("DELETE FROM bead_edges; DELETE FROM beads;")?;
        Ok(())
    }

    /// Drops all index state and rebuilds it from the object store in one
    /// transaction. Objects that fail integrity checks are skipped and counted.
    pub fn reindex(&self, store: &Store) -> Result<RebuildStats, IndexError> {
        let started = Instant::now();
        let mut stats = RebuildStats::default();
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute_batch("DELETE FROM bead_edges; DELETE FROM beads;")?;
        for id in store.list_object_ids()? {
            let id = id?;
            stats.objects_scanned += 1;
            match store.get(&id) {
                Ok(bead) => {
                    stats.edges_written += insert_bead(&tx, &bead)?;
                    stats.records_written += 1;
                }
                Err(StoreError::IntegrityViolation { id, corruption }) => {
                    tracing::warn!(%id, %corruption, "skipping corrupted object during reindex");
                    stats.skipped_corrupted += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        tx.commit()?;
        stats.duration = started.elapsed();
        Ok(stats)
    }
}

fn insert_bead(conn: &Connection, bead: &Bead) -> Result<usize, IndexError> {
    let instant = bead.draft.instant().ok_or_else(|| IndexError::BadTimestamp {
        id: bead.id.clone(),
        timestamp: bead.draft.timestamp.clone(),
    })?;
    let id = bead.id.as_str();
    conn.prepare_cached(
        "INSERT OR REPLACE INTO beads (id, type, timestamp, sort_key, author, is_root)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
    )?
    .execute(params![
        id,
        bead.draft.kind,
        bead.draft.timestamp,
        sort_key(instant),
        bead.draft.author,
        bead.draft.parents.is_empty()
    ])?;
    conn.prepare_cached("DELETE FROM bead_edges WHERE child = ?1")?
        .execute([id])?;
    let mut insert = conn.prepare_cached(
        "INSERT INTO bead_edges (child, parent, position) VALUES (?1, ?2, ?3)",
    )?;
    for (pos, parent) in bead.draft.parents.iter().enumerate() {
        insert.execute(params![id, parent.as_str(), pos as i64])?;
    }
    Ok(bead.draft.parents.len())
}

fn require(conn: &Connection, id: &BeadId) -> Result<(), IndexError> {
    let n: i64 = conn
        .prepare_cached("SELECT count(*) FROM beads WHERE id = ?1")?
        .query_row([id.as_str()], |r| r.get(0))?;
    if n == 0 {
        return Err(IndexError::NotFound(id.clone()));
    }
    Ok(())
}

type RecordRow = (String, String, String, String, bool);

fn read_record_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<RecordRow> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?))
}

fn finish_record((id, kind, timestamp, author, is_root): RecordRow) -> Result<IndexRecord, IndexError> {
    Ok(IndexRecord {
        id: parse_id(id)?,
        kind,
        timestamp,
        author,
        is_root,
    })
}
