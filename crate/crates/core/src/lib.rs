//! Tamper-evident clinical event store.
//!
//! Clinical events are stored as immutable, content-addressed [`Bead`]s that
//! link to their causal predecessors, forming a Merkle DAG on disk. A
//! rebuildable SQLite index accelerates parent/child lookups, and
//! depth-limited BFS serves deterministic causal context for a bead.
//!
//! - [`bead`]: data model, canonical JSON, identity, validation, signatures
//! - [`store`]: write-once sharded object files and integrity verification
//! - [`index`]: ephemeral metadata index and reindexing
//! - [`traversal`]: ancestor/descendant retrieval, clearance filtering,
//!   context documents
//! - [`fhir`]: conversion of FHIR R4 bundles into bead graphs
//! - [`api`]: HTTP service
//!
//! Runnable walkthroughs live in `examples/`.

pub mod api;
pub mod bead;
pub mod engine;
pub mod fhir;
pub mod index;
pub mod store;
pub mod traversal;

pub use bead::{Bead, BeadError, BeadId, Clearance, Draft, Evidence, Role};
pub use engine::{Engine, EngineConfig, PatientRecord, PatientSummary, RecordQuery};
pub use index::{Edge, Index, IndexRecord, RebuildStats};
pub use store::{Corruption, ObjectStatus, PutReceipt, Store, VerifyReport};
pub use traversal::{ContextResult, Direction};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid draft: {0}")]
    Validation(bead::ValidationReport),
    #[error(transparent)]
    Bead(#[from] BeadError),
    #[error(transparent)]
    Store(#[from] store::StoreError),
    #[error(transparent)]
    Index(#[from] index::IndexError),
    #[error(transparent)]
    Traversal(#[from] traversal::TraversalError),
    #[error(transparent)]
    Fhir(#[from] fhir::FhirError),
    #[error("{0} is not a patient root")]
    NotPatientRoot(BeadId),
}
