// Converts Synthea-style FHIR bundles into beads.
//
//     cargo run --example ingest_fhir -- path/to/bundles
//
// Without an argument the bundled fixtures are used.

use std::path::PathBuf;

use medbeads::fhir::{bundle_paths, convert_bundle, load_bundle, render_stats};
use medbeads::{Engine, EngineConfig, RecordQuery};

pub fn run_on(input: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let engine = Engine::open(dir.path(), EngineConfig::default())?;

    for path in bundle_paths(&input)? {
        let conversion = convert_bundle(&load_bundle(&path)?, &engine)?;
        print!("{}", render_stats(&conversion));

        let clinical = engine.patient_record(&conversion.root, RecordQuery::default())?;
        let first = clinical.beads.iter().take(4).map(|b| b.kind()).collect::<Vec<_>>();
        println!("clinical beads: {} (first: {})\n", clinical.beads.len(), first.join(", "));
    }
    for p in engine.patients()? {
        println!("{} {:<18} beads={}", p.timestamp, p.name.unwrap_or_default(), p.bead_count);
    }
    Ok(())
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    run_on(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthea"))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args_os().nth(1) {
        Some(p) => run_on(p.into()),
        None => run(),
    }
}
