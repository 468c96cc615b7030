// A note that denies family and insurance viewers, seen through each role.

use medbeads::{Clearance, Draft, Engine, EngineConfig, Role};
use serde_json::json;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let engine = Engine::open(dir.path(), EngineConfig::default())?;

    let note = engine
        .put(&Draft::new("medical_note", "2026-01-26T10:00:00Z", "did:medbeads:doctor:12345")
            .with_content(json!({"summary": "Psychiatric consult"}))
            .with_clearance(Clearance {
                denied_roles: vec![Role::Family, Role::Insurance],
                reason: Some("Sensitive psychiatric context".into()),
            }))?
        .id;
    let followup = engine
        .put(&Draft::new("medication_order", "2026-01-26T11:00:00Z", "did:medbeads:doctor:12345")
            .with_parents([note.clone()]))?
        .id;

    for role in Role::ALL {
        let ctx = engine.get_context(&followup, None, Some(role))?;
        let sees = ctx.ids().contains(&note);
        println!("{:<13} {}", role.as_str(), if sees { "sees the note" } else { "filtered" });
        assert_eq!(sees, !matches!(role, Role::Family | Role::Insurance));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
