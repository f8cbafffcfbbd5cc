//! Majority-vote ground truth and the human complexity-driver ranking for
//! the bundled fixture annotations.

use layoutjudge::consensus::{driver_frequency, ground_truth_table, ConsensusRule};
use layoutjudge::Store;

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20");
    let dir = tempfile::tempdir()?;
    let mut store = Store::open(dir.path())?;
    store.ingest_manifest(&fixture.join("manifest.json"))?;
    store.import_annotations(&fixture.join("annotations.jsonl"), false)?;

    for quorum in [0.5, 1.0] {
        let truth = ground_truth_table(store.samples(), store.annotations(), ConsensusRule::new(quorum)?, false)?;
        let labels = truth.consensus_labels();
        let complex = labels.iter().filter(|l| l.label.is_complex()).count();
        println!("quorum {quorum}: {complex} of {} samples Complex", labels.len());
    }

    let truth = ground_truth_table(store.samples(), store.annotations(), ConsensusRule::default(), false)?;
    println!("\nsample    label       votes  unanimous");
    for l in truth.consensus_labels().iter().take(8) {
        println!("{:<9} {:<11} {}/{}    {}", l.sample_id, l.label.to_string(), l.complex_votes, l.total_votes, l.unanimity);
    }

    println!("\nrank  driver                                  question  citations");
    for f in driver_frequency(&truth.consensus_labels()) {
        println!("{:<5} {:<39} Q{:<8} {}", f.rank, f.driver.description(), f.question, f.count);
    }

    let mut csv = Vec::new();
    truth.write_csv(&mut csv)?;
    println!("\nground-truth CSV header: {}", String::from_utf8(csv)?.lines().next().unwrap_or_default());
    Ok(())
}
