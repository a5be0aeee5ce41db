//! Prints the condensed-state width per hop for a few interaction sizes and
//! traces one C-MemNN forward pass to show the widths on the tape.
//!
//! ```text
//! cargo run --release --example condensation_schedule
//! ```

use memnet::autodiff::{Mode, Tape};
use memnet::memory::{dim_schedule, SlotText};
use memnet::models::{param_layout, Model, ModelConfig, NoteInput, Variant};

fn main() -> memnet::Result<()> {
    for k in [4, 32, 300] {
        println!("K = {k:>3}: {:?}", dim_schedule(k, 5)?);
    }

    let cfg = ModelConfig {
        variant: Variant::Condensed,
        hops: 4,
        embed_dim: 8,
        value_dim: 4,
        label_count: 3,
        vocab_size: 20,
        retrieval_cap: 2,
        ..ModelConfig::default()
    };
    println!("\nparameters for K = 8, 4 hops:");
    for (name, shape) in param_layout(&cfg)? {
        println!("  {name:<18} {shape:?}");
    }

    let model = Model::new(cfg, 1)?;
    let pages = [
        SlotText { id: "a".into(), body: vec![2, 3, 4], title: vec![5], label: Some(0) },
        SlotText { id: "b".into(), body: vec![6, 7], title: vec![8], label: Some(1) },
    ];
    let input = NoteInput { note: &[2, 9, 10], slots: pages.iter().collect() };
    let mut tape = Tape::new(&model.store);
    let out = model.forward(&mut tape, &input, &mut Mode::Eval)?;
    println!("\nfinal state width {}", tape.shape(out.final_state)[1]);
    for (hop, w) in out.hop_weights.iter().enumerate() {
        println!("hop {} weights {:?}", hop + 1, tape.value(*w).data());
    }
    println!("probabilities {:?}", tape.value(out.probabilities).data());
    Ok(())
}
