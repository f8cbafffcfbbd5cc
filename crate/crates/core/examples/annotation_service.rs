//! Starts the annotation API on an ephemeral port over the fixture corpus,
//! walks through a short annotation session with a plain HTTP client, then
//! shuts down.

use layoutjudge::service::{router, ServiceOptions};
use layoutjudge::Store;
use serde_json::{json, Value};

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20");
    let dir = tempfile::tempdir()?;
    let mut store = Store::open(dir.path())?;
    store.ingest_manifest(&fixture.join("manifest.json"))?;

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    rt.spawn(async move { axum::serve(listener, router(store, ServiceOptions::default())).await });
    println!("serving on {base}");

    let get = |path: &str| -> anyhow::Result<Value> {
        Ok(serde_json::from_str(&ureq::get(&format!("{base}{path}")).call()?.body_mut().read_to_string()?)?)
    };

    let post = |body: &Value, fail_on_status: bool| {
        ureq::post(&format!("{base}/api/samples/srp-001/annotations"))
            .config()
            .http_status_as_error(fail_on_status)
            .build()
            .header("content-type", "application/json")
            .send(body.to_string())
    };

    let pending = get("/api/samples?status=pending&annotator=alice")?;
    println!("alice has {} samples pending", pending.as_array().map_or(0, Vec::len));

    let catalog = get("/api/catalog")?;
    println!("driver catalog:");
    for d in catalog.as_array().into_iter().flatten() {
        println!("  Q{:<3} {}", d["question"], d["name"].as_str().unwrap_or_default());
    }

    let detail = get("/api/samples/srp-001")?;
    let image = ureq::get(&format!("{base}{}", detail["image_urls"][0].as_str().unwrap_or_default()))
        .call()?
        .body_mut()
        .read_to_vec()?;
    println!("srp-001: query {:?}, first screenshot {} bytes", detail["sample"]["query"], image.len());

    for (who, body) in [
        ("alice", json!({"annotator_id": "alice", "label": "Complex", "drivers": ["TooManyBadges", "ColorsTooLoud"]})),
        ("bob", json!({"annotator_id": "bob", "label": "Complex", "drivers": ["TooManyBadges"]})),
        ("carol", json!({"annotator_id": "carol", "label": "NotComplex"})),
    ] {
        let mut resp = post(&body, true)?;
        let created: Value = serde_json::from_str(&resp.body_mut().read_to_string()?)?;
        println!("{who}: {} -> consensus {}", resp.status(), created["consensus"]["label"]);
    }

    // a second vote by the same annotator is refused
    let dup = post(&json!({"annotator_id": "alice", "label": "NotComplex"}), false)?;
    println!("duplicate vote: {}", dup.status());

    println!("consensus: {}", get("/api/samples/srp-001/consensus")?);
    Ok(())
}
