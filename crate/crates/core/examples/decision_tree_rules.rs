//! Trains a depth-3 CART tree on a synthetic 400-sample diagnostic dataset
//! and prints its decision paths and Gini importances.

use layoutjudge::consensus::Driver;
use layoutjudge::dtree::{extract_rules, importance, predict, render_rules_table, train, TreeParams};
use layoutjudge::synth::table3_dataset;

fn main() -> anyhow::Result<()> {
    let (xs, ys) = table3_dataset(7);
    let tree = train(&xs, &ys, TreeParams { max_depth: 3, min_samples_leaf: 5, seed: 0 })?;
    let rules = extract_rules(&tree);
    print!("{}", render_rules_table(&rules));

    let correct = xs.iter().zip(&ys).filter(|(x, y)| predict(&tree, x) == **y).count();
    println!("\ntraining accuracy {correct}/{}", xs.len());
    println!("depth {}, {} splits on {:?}", tree.root.depth(), tree.root.internal_count(), tree.root.questions_used());

    let imp = importance(&tree);
    println!("\nimportances (argmax Q{}):", imp.argmax().unwrap_or(0));
    for q in 1..=25u8 {
        let v = imp.question(q);
        if v > 0.0 {
            let driver = Driver::for_question(q).map(|d| d.description()).unwrap_or("");
            println!("  Q{q:<3} {:>6.1}%  {driver}", v * 100.0);
        }
    }
    imp.write_csv(std::io::stdout())?;
    Ok(())
}
