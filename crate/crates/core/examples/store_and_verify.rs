// Writes a small chain, flips one byte in the middle object, and lets
// `verify_all` find the damage and everything downstream of it.

use medbeads::{Draft, Engine, EngineConfig};
use serde_json::json;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let engine = Engine::open(dir.path(), EngineConfig::default())?;

    let admit = engine
        .put(&Draft::new("encounter", "2026-01-26T08:00:00Z", "did:medbeads:doctor:1")
            .with_content(json!({"reason": "cough and fever"})))?
        .id;
    let xray = engine
        .put(&Draft::new("observation", "2026-01-26T09:00:00Z", "did:medbeads:lab:3")
            .with_parents([admit.clone()])
            .with_content(json!({"finding": "right lower lobe consolidation"})))?
        .id;
    let plan = engine
        .put(&Draft::new("medication_order", "2026-01-26T10:00:00Z", "did:medbeads:doctor:1")
            .with_parents([xray.clone()])
            .with_content(json!({"drug": "amoxicillin", "dose": "500 mg"})))?
        .id;

    let again = engine.put(&Draft::new("encounter", "2026-01-26T08:00:00Z", "did:medbeads:doctor:1")
        .with_content(json!({"reason": "cough and fever"})))?;
    println!("re-put of {admit}: created={}", again.created);

    println!("objects: {}", engine.store().object_count()?);
    assert!(engine.verify_all()?.is_pristine());

    let path = engine.store().object_path(&xray).to_path_buf();
    let mut bytes = std::fs::read(&path)?;
    let at = bytes.len() / 2;
    bytes[at] ^= 0x20;
    std::fs::write(&path, bytes)?;

    let report = engine.verify_all()?;
    for c in &report.corrupted {
        println!("corrupted {}: {}", c.id, c.corruption);
    }
    for id in &report.broken_descendants {
        println!("broken    {id}");
    }
    assert_eq!(report.corrupted[0].id, xray);
    assert_eq!(report.broken_descendants, vec![plan]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
