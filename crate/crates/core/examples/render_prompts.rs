//! Renders both prompting protocols for one fixture sample and shows what
//! gets sent: prompt digest, image count and the request digest that keys
//! record/replay sessions.

use layoutjudge::prompts::{pinned_digest, render, verify_registry, DiagnosticImages, PromptProtocol, SamplingConfig};
use layoutjudge::{Protocol, Store};

fn main() -> anyhow::Result<()> {
    verify_registry().map_err(anyhow::Error::msg)?;
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20");
    let dir = tempfile::tempdir()?;
    let mut store = Store::open(dir.path())?;
    store.ingest_manifest(&fixture.join("manifest.json"))?;
    let sample = store.sample("srp-002").expect("fixture sample").clone();

    for protocol in [Protocol::Standard, Protocol::Diagnostic] {
        let prompt = PromptProtocol::builtin(protocol);
        for images in [DiagnosticImages::First, DiagnosticImages::Stitch] {
            let req = render(&store, &sample, &prompt, &SamplingConfig::default(), images)?;
            println!(
                "{protocol:<10} images={:<6} parts={} image_parts={} request={}",
                images.as_str(),
                req.parts.len(),
                req.image_count(),
                &req.digest()[..16]
            );
        }
        println!("  prompt sha256 {} (pinned: {})", pinned_digest(protocol), prompt.is_pinned());
        let first_line = prompt.text().lines().find(|l| !l.trim().is_empty()).unwrap_or_default();
        println!("  starts: {first_line}");
    }

    // any edit to the prompt text changes every request digest
    let edited = PromptProtocol::custom(Protocol::Diagnostic, format!("{} ", PromptProtocol::builtin(Protocol::Diagnostic).text()));
    let req = render(&store, &sample, &edited, &SamplingConfig::default(), DiagnosticImages::First)?;
    println!("edited prompt pinned: {}, request={}", edited.is_pinned(), &req.digest()[..16]);
    Ok(())
}
