//! Saves a briefly trained model, reloads it, checks that predictions match
//! at 32-bit precision, then shows what a damaged file reports.

use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};
use memnet::models::{ModelConfig, Variant};
use memnet::trainer::{
    decode_checkpoint, encode_checkpoint, fit, load_checkpoint, note_input, save_checkpoint, TrainConfig,
    TrainingMeta,
};

fn main() -> memnet::Result<()> {
    let spec = SynthSpec { notes: 300, ..SynthSpec::default() };
    let synth = synth_generate(&spec)?;
    let pipeline = PipelineConfig { label_count: 10, ..PipelineConfig::default() };
    let corpus = prepare(synth.parsed_notes(), &synth.kb_pages(), Stopwords::english(), pipeline)?;
    let cfg = ModelConfig {
        variant: Variant::Averaged,
        embed_dim: 16,
        value_dim: 8,
        label_count: corpus.labels.len(),
        vocab_size: corpus.vocab.len(),
        ..ModelConfig::default()
    };
    let train = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    let model = fit(&cfg, &corpus, &train)?.best;

    let dir = std::env::temp_dir().join("memnet-checkpoint-example");
    std::fs::create_dir_all(&dir).map_err(|e| memnet::Error::Data(e.to_string()))?;
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &model, train.seed, TrainingMeta { epoch: 2, best_val_metric: None }, None, None)?;
    let loaded = load_checkpoint(&path)?;

    // Stored values are f32, so compare against the original rounded the same way.
    let mut rounded = model.clone();
    for p in rounded.store.iter_mut() {
        let r = p.value().to_f32_precision();
        p.value_mut().copy_from_slice(r.data());
    }
    let mut identical = 0;
    for ex in &corpus.splits.val {
        let a = rounded.predict(&note_input(ex, &corpus.kb))?.probabilities;
        let b = loaded.model.predict(&note_input(ex, &corpus.kb))?.probabilities;
        identical += usize::from(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    println!("bitwise-identical predictions: {identical}/{}", corpus.splits.val.len());

    let bytes = encode_checkpoint(&model, train.seed, TrainingMeta { epoch: 2, best_val_metric: None }, None, None)?;
    match decode_checkpoint(&bytes[..bytes.len() - 10]) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file unexpectedly decoded"),
    }
    Ok(())
}
