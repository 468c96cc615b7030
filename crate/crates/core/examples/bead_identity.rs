// A bead's id is the SHA-256 of its canonical JSON. Key order and whitespace
// in the submitted document do not matter; any change to a hashed field does.

use medbeads::bead::{sign, verify_signature, SecretKey};
use medbeads::{Bead, Draft};
use rand::rngs::OsRng;
use serde_json::json;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let a = Draft::from_document(&json!({
        "type": "observation",
        "timestamp": "2026-01-26T09:30:00Z",
        "author": "did:medbeads:nurse:77",
        "content": {"observation_name": "Body temperature", "value": 38.4, "unit": "Cel"}
    }))?;
    let b = Draft::from_document(&serde_json::from_str(
        r#"{ "content": {"unit":"Cel","value":38.4,"observation_name":"Body temperature"},
             "author":"did:medbeads:nurse:77", "timestamp":"2026-01-26T09:30:00Z", "type":"observation" }"#,
    )?)?;

    println!("canonical: {}", String::from_utf8(a.canonicalize()?)?);
    println!("id:        {}", a.compute_id()?);
    assert_eq!(a.compute_id()?, b.compute_id()?);

    let mut edited = a.clone();
    edited.content["value"] = json!(38.5);
    println!("edited:    {}", edited.compute_id()?);
    assert_ne!(a.compute_id()?, edited.compute_id()?);

    let key = SecretKey::generate(&mut OsRng);
    let signature = sign(&a, &key)?;
    let bead = Bead::seal(a, Some(signature))?;
    println!("signed by public key {}", key.public_key().to_base64());
    assert!(verify_signature(&bead, &key.public_key())?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
