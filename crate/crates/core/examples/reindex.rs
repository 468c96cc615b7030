// The SQLite index is a cache over the object files. Delete it and rebuild.

use medbeads::engine::delete_index;
use medbeads::fhir::{convert_bundle, load_bundle};
use medbeads::{Engine, EngineConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let bundle = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthea/chen_moreau.json");

    let before = {
        let engine = Engine::open(dir.path(), EngineConfig::default())?;
        convert_bundle(&load_bundle(&bundle)?, &engine)?;
        engine.patients()?
    };

    delete_index(dir.path())?;
    let engine = Engine::open(dir.path(), EngineConfig::default())?;
    assert!(engine.patients()?.is_empty());

    let stats = engine.reindex()?;
    println!(
        "scanned {} objects, wrote {} records and {} edges in {:?}",
        stats.objects_scanned, stats.records_written, stats.edges_written, stats.duration
    );
    let after = engine.patients()?;
    for p in &after {
        println!("{} {} beads={}", p.id, p.name.as_deref().unwrap_or("-"), p.bead_count);
    }
    assert_eq!(before, after);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
