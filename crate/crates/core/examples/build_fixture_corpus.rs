//! Regenerates the bundled fixtures: the 20-sample corpus with its replay
//! session, and the parser golden and mutation corpora.
//!
//! ```text
//! cargo run --example build_fixture_corpus [-- <out-dir>]
//! ```

use std::path::PathBuf;

use layoutjudge::synth;

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).unwrap() + "\n").collect()
}

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));

    let layout = synth::write_fixture_corpus(&out.join("srp20"))?;
    println!("srp20: {} screenshots, manifest, annotations, session", layout.files.len());

    let parser_dir = out.join("parser");
    std::fs::create_dir_all(&parser_dir)?;
    let golden = synth::golden_corpus();
    let mutations = synth::mutation_corpus();
    std::fs::write(parser_dir.join("golden.jsonl"), jsonl(&golden))?;
    std::fs::write(parser_dir.join("mutations.jsonl"), jsonl(&mutations))?;
    println!("parser: {} golden, {} mutation cases", golden.len(), mutations.len());
    println!("written under {}", out.display());
    Ok(())
}
