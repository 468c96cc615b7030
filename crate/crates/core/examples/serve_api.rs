// Boots the HTTP service on an ephemeral port, posts two beads, reads the
// context back in both formats, then shuts down.

use std::sync::Arc;

use medbeads::api::{router, serve, ApiConfig};
use medbeads::{Engine, EngineConfig};
use serde_json::{json, Value};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let engine = Arc::new(Engine::open(dir.path(), EngineConfig::default())?);
    let rt = tokio::runtime::Runtime::new()?;

    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let base = format!("http://{}", listener.local_addr()?);
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve(listener, router(engine, &ApiConfig::default()), async {
            let _ = stopped.await;
        }));

        let http = reqwest::Client::new();
        let post = |body: Value| http.post(format!("{base}/beads")).json(&body).send();

        let first = post(json!({
            "type": "encounter", "timestamp": "2026-03-02T08:00:00Z",
            "author": "did:medbeads:doctor:1", "content": {"reason": "follow-up"}
        }))
        .await?;
        println!("POST /beads -> {}", first.status());
        let visit = first.json::<Value>().await?["id"].clone();

        let second = post(json!({
            "type": "observation", "timestamp": "2026-03-02T08:20:00Z",
            "author": "did:medbeads:nurse:2", "parents": [visit],
            "content": {"observation_name": "Blood pressure", "value": "128/82"}
        }))
        .await?;
        let obs = second.json::<Value>().await?["id"].as_str().unwrap_or_default().to_owned();

        let ctx: Value = http.get(format!("{base}/beads/context?id={obs}&depth=1")).send().await?.json().await?;
        println!("context beads: {}", ctx["beads"].as_array().map_or(0, Vec::len));
        let text = http
            .get(format!("{base}/beads/context?id={obs}&format=text"))
            .send()
            .await?
            .text()
            .await?;
        print!("{text}");

        let missing = http.get(format!("{base}/beads?id=sha256:{}", "0".repeat(64))).send().await?;
        println!("unknown id -> {} {}", missing.status(), missing.text().await?);

        let health: Value = http.get(format!("{base}/health")).send().await?.json().await?;
        println!("health: {health}");

        let _ = stop.send(());
        server.await??;
        Ok::<_, Box<dyn std::error::Error>>(())
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
