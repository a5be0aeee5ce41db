//! Trains a 3-hop C-MemNN on the synthetic corpus, writes the run to disk and
//! evaluates the best checkpoint once on the test split.
//!
//! ```text
//! cargo run --release --example train_cmemnn -- [out_dir] [epochs]
//! ```

use std::path::PathBuf;

use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};
use memnet::models::{ModelConfig, Variant};
use memnet::trainer::{evaluate, train_to_dir, TrainConfig};

fn main() -> memnet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "runs/c_memnn".into()).into();
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);

    let synth = synth_generate(&SynthSpec::default())?;
    let pages = synth.kb_pages();
    let pipeline = PipelineConfig { label_count: 20, ..PipelineConfig::default() };
    let corpus = prepare(synth.parsed_notes(), &pages, Stopwords::english(), pipeline)?;

    let model = ModelConfig {
        variant: Variant::Condensed,
        hops: 3,
        embed_dim: 32,
        value_dim: 16,
        label_count: corpus.labels.len(),
        vocab_size: corpus.vocab.len(),
        ..ModelConfig::default()
    };
    let train = TrainConfig { max_epochs: epochs, patience: 0, ..TrainConfig::default() };
    let (result, files) = train_to_dir(&out, &model, &corpus, &pages, &train)?;
    println!("best epoch {} of {}", result.best_epoch, result.history.len());

    let test = evaluate(&result.best, corpus.splits.test.open(), &corpus.kb, corpus.labels.labels())?;
    println!("{}", test.to_table());
    println!("checkpoint: {}", files.best_checkpoint.display());
    Ok(())
}
