//! Trains C-MemNN at 1 to 5 hops, one run directory per depth, and prints the
//! per-epoch validation P@5 of all runs as CSV through the `report` command.
//!
//! ```text
//! cargo run --release --example hop_sweep -- [out_dir] [epochs]
//! ```

use std::path::PathBuf;

use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};
use memnet::models::{ModelConfig, Variant};
use memnet::trainer::{train_to_dir, TrainConfig};

fn main() -> memnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "runs/hop_sweep".into()).into();
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);

    let synth = synth_generate(&SynthSpec::default())?;
    let pages = synth.kb_pages();
    let pipeline = PipelineConfig { label_count: 20, ..PipelineConfig::default() };
    let corpus = prepare(synth.parsed_notes(), &pages, Stopwords::english(), pipeline)?;
    let train = TrainConfig { max_epochs: epochs, patience: 0, ..TrainConfig::default() };

    for hops in 1..=5 {
        let cfg = ModelConfig {
            variant: Variant::Condensed,
            hops,
            embed_dim: 32,
            value_dim: 16,
            label_count: corpus.labels.len(),
            vocab_size: corpus.vocab.len(),
            ..ModelConfig::default()
        };
        let (result, _) = train_to_dir(&out.join(format!("hops_{hops}")), &cfg, &corpus, &pages, &train)?;
        eprintln!("hops {hops}: best val P@5 {:.4} at epoch {}", result.best_val_p_at_5, result.best_epoch);
    }

    let out_arg = out.to_string_lossy().into_owned();
    std::process::exit(memnet::cli::run(["memnet", "report", "--history-dir", &out_arg]));
}
