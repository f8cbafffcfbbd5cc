//! Runs both protocols over the 20-sample fixture from its recorded
//! session. No network access is made.

use layoutjudge::corpus::Outcome;
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
    cfg.validate()?;
    harness::cmd_ingest(&cfg, &fixture.join("manifest.json"))?;
    harness::cmd_import_annotations(&cfg, &fixture.join("annotations.jsonl"), false)?;

    for protocol in [Protocol::Standard, Protocol::Diagnostic] {
        let run = harness::cmd_evaluate(&cfg, protocol)?;
        println!("== {} ({} records)", run.run_id, run.records.len());
        for r in &run.records {
            let verdict = match (&r.outcome, r.predicted_label()) {
                (Outcome::Parsed(a), Some(label)) => format!("score {} -> {label}", a.complexity_score()),
                (Outcome::Error(e), _) => format!("error: {e}"),
                _ => "no prediction".into(),
            };
            let repaired = if r.repair_applied { " (repaired)" } else { "" };
            println!("{:<8} {verdict}{repaired}", r.sample_id);
        }
    }
    let ids = harness::open_store(&cfg)?.run_ids()?;
    print!("{}", harness::cmd_metrics(&cfg, &ids)?.render_text());
    Ok(())
}
