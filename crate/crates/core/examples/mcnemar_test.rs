//! McNemar's paired test: exact binomial below 25 discordant pairs,
//! continuity-corrected chi-square above.

use layoutjudge::metrics::{mcnemar, mcnemar_from_counts};

fn main() -> anyhow::Result<()> {
    for (b, c) in [(0, 0), (3, 3), (5, 15), (2, 20), (12, 12), (40, 60), (10, 90)] {
        let r = mcnemar_from_counts(b, c);
        println!("b={b:<3} c={c:<3} {:<18} statistic {:>7.3}  p {:.4}", format!("{:?}", r.method), r.statistic, r.p_value);
    }

    // per-sample correctness of two classifiers on the same eight items
    let a = [true, true, false, true, false, true, true, false];
    let b = [false, true, true, true, true, true, false, true];
    let r = mcnemar(&a, &b)?;
    println!("\npaired vectors: b={} (A right, B wrong), c={} (A wrong, B right), p {:.4}", r.b, r.c, r.p_value);
    if let Some(note) = r.note {
        println!("note: {note}");
    }
    Ok(())
}
