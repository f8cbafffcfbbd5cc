//! Ingests the bundled fixture manifest into a fresh corpus, records a few
//! annotations by hand and prints the resulting consensus.

use layoutjudge::corpus::AnnotationSubmission;
use layoutjudge::synth::FIXTURE_MANIFEST;
use layoutjudge::{Label, Store};

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/srp20");
    let dir = tempfile::tempdir()?;
    let mut store = Store::open(dir.path())?;

    let summary = store.ingest_manifest(&fixture.join(FIXTURE_MANIFEST))?;
    println!("ingested {} samples: {:?}", summary.added, summary.by_category);
    let again = store.ingest_manifest(&fixture.join(FIXTURE_MANIFEST))?;
    println!("re-ingest: {} added, {} unchanged", again.added, again.unchanged);

    let votes = [
        ("ann-a", Label::Complex, vec!["TooManyBadges", "ProductsTooSimilar"]),
        ("ann-b", Label::Complex, vec!["TooManyBadges"]),
        ("ann-c", Label::NotComplex, vec![]),
    ];
    for (annotator, label, drivers) in votes {
        let submission = AnnotationSubmission {
            sample_id: None,
            annotator_id: annotator.into(),
            label,
            drivers: drivers.into_iter().map(String::from).collect(),
            submitted_at: None,
            overwrite: false,
        };
        store.store_annotation(submission.into_annotation("srp-001", chrono::Utc::now())?, false)?;
    }

    let duplicate = AnnotationSubmission {
        sample_id: None,
        annotator_id: "ann-a".into(),
        label: Label::NotComplex,
        drivers: vec![],
        submitted_at: None,
        overwrite: false,
    };
    let err = store
        .store_annotation(duplicate.into_annotation("srp-001", chrono::Utc::now())?, false)
        .unwrap_err();
    println!("second vote by ann-a rejected: [{}] {err}", err.class());

    let consensus = store.consensus("srp-001")?.expect("annotated");
    println!(
        "srp-001 -> {} ({}/{} Complex, unanimous: {}), drivers {:?}",
        consensus.label, consensus.complex_votes, consensus.total_votes, consensus.unanimity, consensus.driver_counts
    );
    Ok(())
}
