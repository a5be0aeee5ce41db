//! Generates the default synthetic corpus, prints its label distribution and
//! writes `notes.jsonl` / `kb.jsonl`.
//!
//! ```text
//! cargo run --release --example synthetic_corpus -- [out_dir]
//! ```

use std::path::PathBuf;

use memnet::corpus::{label_frequencies, synth_generate, SynthSpec};

fn main() -> memnet::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()).into();
    let spec = SynthSpec::default();
    let corpus = synth_generate(&spec)?;

    let notes = corpus.parsed_notes();
    let mut per_note = vec![0usize; spec.max_labels + 1];
    for n in &notes {
        per_note[n.gold_labels.len()] += 1;
    }
    println!("labels per note:");
    for (k, count) in per_note.iter().enumerate().skip(1) {
        println!("  {k}: {count}");
    }
    println!("label frequencies:");
    for (label, count) in label_frequencies(&notes) {
        println!("  {label:<24} {count:>5} {}", "#".repeat(count / 20));
    }
    println!("first note: {}", corpus.notes[0].text);

    corpus.write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
