//! Replays both protocols on the fixture corpus, then builds the full
//! comparison report and prints the markdown.

use layoutjudge::harness::{self, DispatchMode, HarnessConfig};
use layoutjudge::Protocol;

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20");
    let dir = tempfile::tempdir()?;
    let cfg = HarnessConfig {
        corpus_root: dir.path().to_path_buf(),
        mode: DispatchMode::Replay,
        session: Some(fixture.join("session.jsonl")),
        ..HarnessConfig::default()
    };
    harness::cmd_ingest(&cfg, &fixture.join("manifest.json"))?;
    harness::cmd_import_annotations(&cfg, &fixture.join("annotations.jsonl"), false)?;
    let baseline = harness::cmd_evaluate(&cfg, Protocol::Standard)?;
    let candidate = harness::cmd_evaluate(&cfg, Protocol::Diagnostic)?;

    let (report, out) = harness::cmd_report(&cfg, &baseline.run_id, &candidate.run_id)?;
    print!("{}", report.to_markdown());
    eprintln!("\nartifacts written to {}:", out.display());
    for entry in std::fs::read_dir(&out)? {
        eprintln!("  {}", entry?.file_name().to_string_lossy());
    }
    Ok(())
}
