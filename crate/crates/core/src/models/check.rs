//! Full-model finite-difference check on a small random instance.

use super::config::{ModelConfig, Variant};
use super::model::{Model, NoteInput};
use crate::autodiff::{grad_check, GradCheckConfig, GradCheckReport, Mode};
use crate::error::Result;
use crate::memory::{AddressingKind, SlotText};
use crate::rng;
use rand::Rng;

/// Dimensions of the gradient-check instance.
#[derive(Clone, Debug)]
pub struct CheckDims {
    pub embed_dim: usize,
    pub slots: usize,
    pub labels: usize,
    pub vocab: usize,
    pub value_dim: usize,
    pub gate_hidden: usize,
    pub note_len: usize,
    pub body_len: usize,
}

impl Default for CheckDims {
    fn default() -> Self {
        CheckDims {
            embed_dim: 16,
            slots: 8,
            labels: 6,
            vocab: 50,
            value_dim: 8,
            gate_hidden: 8,
            note_len: 12,
            body_len: 10,
        }
    }
}

/// Checks the gradient of the training loss (label and slot terms, L2, and
/// dropout under a pinned mask) for one model configuration. `check.seed`
/// also seeds the initial parameters, the instance and the dropout mask.
pub fn model_grad_check(
    variant: Variant,
    hops: usize,
    addressing: AddressingKind,
    dims: &CheckDims,
    check: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let seed = check.seed;
    let cfg = ModelConfig {
        variant,
        hops,
        embed_dim: dims.embed_dim,
        value_dim: dims.value_dim,
        addressing,
        gate_hidden: dims.gate_hidden,
        label_count: dims.labels,
        vocab_size: dims.vocab,
        retrieval_cap: dims.slots,
        ..ModelConfig::default()
    };
    let mut model = Model::new(cfg, seed)?;

    let mut g = rng::stream(seed, "gradcheck/instance");
    let mut words = |n: usize| -> Vec<usize> { (0..n).map(|_| g.random_range(0..dims.vocab)).collect() };
    let note = words(dims.note_len);
    let slots: Vec<SlotText> = (0..dims.slots)
        .map(|i| SlotText {
            id: format!("page-{i}"),
            body: words(dims.body_len),
            title: words(2),
            label: (i < dims.labels).then_some(i),
        })
        .collect();
    let gold = vec![0, dims.labels / 2];

    // The checker perturbs the store while the closure rebuilds the graph
    // from the model's handles, so the two are held apart for the duration.
    let mut store = std::mem::take(&mut model.store);
    grad_check(&mut store, check, |tape| {
        let input = NoteInput {
            note: &note,
            slots: slots.iter().collect(),
        };
        let mut mask_rng = rng::stream(seed, "gradcheck/dropout");
        let out = model.forward(tape, &input, &mut Mode::Train(&mut mask_rng))?;
        model.loss(tape, &out, &gold, 1e-3)
    })
}
