//! Builds the knowledge-base index for the synthetic corpus and shows which
//! pages a held-out note retrieves, next to its gold labels.
//!
//! ```text
//! cargo run --release --example retrieval
//! ```

use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};

fn main() -> memnet::Result<()> {
    let synth = synth_generate(&SynthSpec::default())?;
    let pipeline = PipelineConfig { label_count: 20, retrieval_cap: 5, ..PipelineConfig::default() };
    let corpus = prepare(synth.parsed_notes(), &synth.kb_pages(), Stopwords::english(), pipeline)?;

    let mut hits = 0;
    let mut total = 0;
    for ex in &corpus.splits.val {
        for &gold in &ex.labels {
            total += 1;
            if ex.slots.iter().any(|&s| corpus.kb.slot(s).label == Some(gold)) {
                hits += 1;
            }
        }
    }
    println!("gold pages among the top 5 retrieved: {hits}/{total}");

    for ex in corpus.splits.val.iter().take(3) {
        let words: Vec<&str> = ex.words.iter().filter_map(|&w| corpus.vocab.word(w)).collect();
        let gold: Vec<&str> = ex.labels.iter().map(|&l| corpus.labels.name(l)).collect();
        println!("\n{}: {}", ex.note_id, words.join(" "));
        println!("  gold:      {gold:?}");
        let pages: Vec<&str> = ex.slots.iter().map(|&s| corpus.kb.slot(s).id.as_str()).collect();
        println!("  retrieved: {pages:?}");
    }
    Ok(())
}
