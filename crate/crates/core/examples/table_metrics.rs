//! Precision, recall, F1 and Cohen's kappa for the two published confusion
//! matrices, the improvement table, and the deltas against the printed
//! figures.

use layoutjudge::metrics::baseline::{compare_to_printed, DIAGNOSTIC_CONFUSION, STANDARD_CONFUSION};
use layoutjudge::metrics::{classification_metrics, ComparisonTable, DEFINITION_NOTES};
use layoutjudge::Protocol;

fn main() -> anyhow::Result<()> {
    let standard = classification_metrics(&STANDARD_CONFUSION)?;
    let diagnostic = classification_metrics(&DIAGNOSTIC_CONFUSION)?;
    println!("standard\n{STANDARD_CONFUSION}\n");
    println!("diagnostic\n{DIAGNOSTIC_CONFUSION}\n");

    let table = ComparisonTable::new("Standard Gestalt Prompting", standard.clone(), "Diagnostic Prompting", diagnostic.clone());
    print!("{}", table.render_text());

    println!();
    for (protocol, report) in [(Protocol::Standard, &standard), (Protocol::Diagnostic, &diagnostic)] {
        let cmp = compare_to_printed(protocol, report);
        println!(
            "{protocol}: max |delta| vs printed {:.4} (tolerance {}) -> {}",
            cmp.max_abs_delta,
            cmp.tolerance,
            if cmp.within_tolerance { "ok" } else { "MISMATCH" }
        );
        for n in cmp.notes {
            println!("  note: {n}");
        }
    }
    println!();
    for n in DEFINITION_NOTES {
        println!("* {n}");
    }
    Ok(())
}
