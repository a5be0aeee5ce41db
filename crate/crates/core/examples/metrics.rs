//! Evaluation metrics on a hand-written prediction table.

use memnet::metrics::{hamming_loss, macro_auc, precision_at_k, EvalReport};

fn main() -> memnet::Result<()> {
    let names: Vec<String> = ["flu", "asthma", "anemia"].iter().map(|s| s.to_string()).collect();
    let scores = vec![
        vec![0.9, 0.2, 0.4],
        vec![0.3, 0.8, 0.1],
        vec![0.6, 0.7, 0.2],
        vec![0.1, 0.3, 0.9],
    ];
    let gold = vec![vec![0], vec![1], vec![0, 1], vec![1]];

    // anemia never occurs, so it has no AUC and is skipped from the mean
    let auc = macro_auc(&scores, &gold)?;
    println!("per-label AUC {:?}, skipped {}", auc.per_label, auc.skipped);
    println!("P@1 {:.3}", precision_at_k(&scores, &gold, 1)?);
    println!("hamming {:.3}", hamming_loss(&scores, &gold, 0.5)?);

    let report = EvalReport::compute(&scores, &gold, &names)?;
    println!("\n{}", report.to_table());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
