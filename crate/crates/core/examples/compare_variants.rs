//! Trains the bag-of-words baseline and each memory variant on the same
//! synthetic corpus, then prints validation metrics side by side.
//!
//! ```text
//! cargo run --release --example compare_variants -- [epochs]
//! ```

use std::time::Instant;

use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};
use memnet::models::{ModelConfig, Variant};
use memnet::trainer::{evaluate, fit, TrainConfig};

fn main() -> memnet::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);

    let synth = synth_generate(&SynthSpec::default())?;
    let pipeline = PipelineConfig { label_count: 20, ..PipelineConfig::default() };
    let corpus = prepare(synth.parsed_notes(), &synth.kb_pages(), Stopwords::english(), pipeline)?;
    let train = TrainConfig { max_epochs: epochs, patience: 0, ..TrainConfig::default() };

    println!("{:<10} {:>9} {:>9} {:>8} {:>7}", "variant", "val auc", "val p@5", "epoch", "secs");
    let variants = [
        Variant::BagOfWords,
        Variant::EndToEnd,
        Variant::KeyValue,
        Variant::Averaged,
        Variant::Condensed,
    ];
    for variant in variants {
        let cfg = ModelConfig {
            variant,
            hops: 3,
            embed_dim: 32,
            value_dim: 16,
            label_count: corpus.labels.len(),
            vocab_size: corpus.vocab.len(),
            ..ModelConfig::default()
        };
        let start = Instant::now();
        let result = fit(&cfg, &corpus, &train)?;
        let report = evaluate(&result.best, &corpus.splits.val, &corpus.kb, corpus.labels.labels())?;
        println!(
            "{:<10} {:>9.4} {:>9.4} {:>8} {:>7.1}",
            variant.to_string(),
            report.auc_macro,
            report.precision_at_5,
            result.best_epoch,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
