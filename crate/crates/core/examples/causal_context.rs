// Ancestor context for a bead, rendered as the plain-text document handed to
// downstream reasoning tools, then the same graph walked the other way.

use medbeads::traversal::serialize_context;
use medbeads::{Draft, Engine, EngineConfig};
use serde_json::json;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let engine = Engine::open(dir.path(), EngineConfig::default())?;
    let doctor = "did:medbeads:doctor:12345";

    let visit = engine
        .put(&Draft::new("encounter", "2026-01-20T09:00:00Z", doctor).with_content(json!({"reason": "dyspnea"})))?
        .id;
    let labs = engine
        .put(&Draft::new("observation", "2026-01-20T10:15:00Z", "did:medbeads:lab:3")
            .with_parents([visit.clone()])
            .with_content(json!({"observation_name": "CRP", "value": 87, "unit": "mg/L"})))?
        .id;
    let imaging = engine
        .put(&Draft::new("observation", "2026-01-20T11:00:00Z", "did:medbeads:lab:3")
            .with_parents([visit.clone()])
            .with_content(json!({"observation_name": "Chest CT", "finding": "consolidation"})))?
        .id;
    let dx = engine
        .put(&Draft::new("medical_note", "2026-01-20T12:00:00Z", doctor)
            .with_parents([labs, imaging])
            .with_content(json!({"summary": "Community-acquired pneumonia"})))?
        .id;
    let rx = engine
        .put(&Draft::new("medication_order", "2026-01-20T12:30:00Z", doctor)
            .with_parents([dx.clone()])
            .with_content(json!({"drug": "amoxicillin"})))?
        .id;

    let one_hop = engine.get_context(&rx, Some(1), None)?;
    assert_eq!(one_hop.ids(), vec![dx]);

    let full = engine.get_context(&rx, None, None)?;
    print!("{}", serialize_context(&full));
    println!();
    println!("{} ancestors, {} edges, truncated={}", full.beads.len(), full.edges.len(), full.truncated);

    let downstream = engine.get_descendants(&visit, Some(2), None)?;
    println!("within two hops of the visit:");
    for b in &downstream.beads {
        println!("  {} {}", b.timestamp(), b.kind());
    }
    assert!(downstream.truncated);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
