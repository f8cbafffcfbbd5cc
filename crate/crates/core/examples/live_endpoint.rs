//! Sends the diagnostic prompt for one fixture sample to a real
//! OpenAI-compatible endpoint and records the exchange to a session file.
//!
//! ```text
//! MODEL_API_KEY=... MODEL_BASE_URL=https://host/v1 MODEL_ID=some-vl-model \
//!     cargo run --example live_endpoint
//! ```

use layoutjudge::client::{ModelClient, ModelEndpointConfig};
use layoutjudge::harness::interpret;
use layoutjudge::parser::DEFAULT_THRESHOLD;
use layoutjudge::prompts::{render_bytes, DiagnosticImages, PromptProtocol, SamplingConfig};
use layoutjudge::Protocol;

fn main() -> anyhow::Result<()> {
    let defaults = ModelEndpointConfig::default();
    if std::env::var_os(&defaults.auth_env).is_none() {
        println!("{} is not set; nothing to do.", defaults.auth_env);
        println!("Set it along with MODEL_BASE_URL and MODEL_ID to query a live endpoint.");
        return Ok(());
    }
    let cfg = ModelEndpointConfig {
        base_url: std::env::var("MODEL_BASE_URL").unwrap_or(defaults.base_url.clone()),
        model_id: std::env::var("MODEL_ID").unwrap_or(defaults.model_id.clone()),
        ..defaults
    };

    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20/screenshots");
    let png = std::fs::read(fixture.join("srp-001-0.png"))?;
    let req = render_bytes(
        "srp-001",
        vec![png],
        &PromptProtocol::builtin(Protocol::Diagnostic),
        &SamplingConfig::default(),
        DiagnosticImages::First,
    )?;

    let session = std::env::temp_dir().join("layoutjudge-live-session.jsonl");
    let client = ModelClient::recording(cfg, &session)?;
    let resp = client.complete(&req)?;
    println!("{} attempt(s), {} ms", resp.attempt_count, resp.latency_ms);
    println!("{}", resp.raw_text);
    let (outcome, repaired, binary) = interpret(Protocol::Diagnostic, &resp.raw_text, DEFAULT_THRESHOLD);
    println!("\noutcome {outcome:?}\nrepaired {repaired}, prediction {:?}", binary.map(|b| b.label));
    println!("session appended to {}", session.display());
    Ok(())
}
