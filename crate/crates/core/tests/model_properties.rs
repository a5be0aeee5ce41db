//! Property tests over whole models, the trainer and the synthetic pipeline.

use memnet::autodiff::{Mode, ParamStore, Tape, Tensor};
use memnet::corpus::{prepare, synth_generate, PipelineConfig, Stopwords, SynthSpec};
use memnet::memory::{address, Addressing, AddressingKind, MemoryBank, SlotText};
use memnet::metrics::EvalReport;
use memnet::models::{Model, ModelConfig, NoteInput, Variant};
use memnet::rng;
use memnet::trainer::{adam_step, decode_checkpoint, encode_checkpoint, OptimizerState, TrainingMeta};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 40;
const LABELS: usize = 5;

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(vec![
        Variant::BagOfWords,
        Variant::EndToEnd,
        Variant::KeyValue,
        Variant::Averaged,
        Variant::Condensed,
    ])
}

fn addressing() -> impl Strategy<Value = AddressingKind> {
    prop::sample::select(vec![AddressingKind::Softmax, AddressingKind::Sigmoid, AddressingKind::Gated])
}

fn model(variant: Variant, addressing: AddressingKind, hops: usize, seed: u64) -> Model {
    let cfg = ModelConfig {
        variant,
        hops,
        addressing,
        embed_dim: 6,
        value_dim: 4,
        gate_hidden: 4,
        label_count: LABELS,
        vocab_size: VOCAB,
        retrieval_cap: 6,
        ..ModelConfig::default()
    };
    Model::new(cfg, seed).unwrap()
}

fn instance(seed: u64) -> (Vec<usize>, Vec<SlotText>, Vec<usize>) {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut words = |n: usize| -> Vec<usize> { (0..n).map(|_| g.random_range(0..VOCAB)).collect() };
    let note = words(9);
    let slots = (0..6)
        .map(|i| SlotText {
            id: format!("page {i}"),
            body: words(7),
            title: words(2),
            label: (i < LABELS).then_some(i),
        })
        .collect();
    (note, slots, vec![1, 3])
}

fn loss_and_grads(m: &Model, seed: u64, l2: f64) -> (f64, Vec<Vec<f64>>) {
    let (note, slots, gold) = instance(seed);
    let input = NoteInput {
        note: &note,
        slots: slots.iter().collect(),
    };
    let mut tape = Tape::new(&m.store);
    let mut mask = rng::stream(seed, "dropout");
    let out = m.forward(&mut tape, &input, &mut Mode::Train(&mut mask)).unwrap();
    let loss = m.loss(&mut tape, &out, &gold, l2).unwrap();
    let grads = tape.backward(loss).unwrap();
    let dense = grads.iter().map(|(_, g)| g.to_dense().into_data()).collect();
    (tape.scalar(loss), dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradients_are_reproducible(v in variant(), a in addressing(), hops in 1usize..5, seed in any::<u64>()) {
        let m = model(v, a, hops, seed);
        let (l1, g1) = loss_and_grads(&m, seed, 1e-4);
        let (l2, g2) = loss_and_grads(&m, seed, 1e-4);
        prop_assert_eq!(l1.to_bits(), l2.to_bits());
        prop_assert_eq!(g1.len(), g2.len());
        for (x, y) in g1.iter().zip(&g2) {
            prop_assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn loss_is_non_negative(v in variant(), a in addressing(), hops in 1usize..5, seed in any::<u64>(), l2 in 0.0f64..0.1) {
        let (loss, _) = loss_and_grads(&model(v, a, hops, seed), seed, l2);
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn eval_predictions_are_pure_and_in_range(v in variant(), a in addressing(), hops in 1usize..5, seed in any::<u64>()) {
        let m = model(v, a, hops, seed);
        let (note, slots, _) = instance(seed ^ 1);
        let input = NoteInput { note: &note, slots: slots.iter().collect() };
        let first = m.predict(&input).unwrap();
        let again = m.predict(&input).unwrap();
        prop_assert_eq!(first.probabilities.len(), LABELS);
        prop_assert!(first.probabilities.iter().all(|&p| p > 0.0 && p < 1.0));
        prop_assert!(first.probabilities.iter().zip(&again.probabilities).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert_eq!(first, again);
    }

    #[test]
    fn checkpoints_keep_f32_values_exactly(v in variant(), a in addressing(), hops in 1usize..5, seed in any::<u64>()) {
        let m = model(v, a, hops, seed);
        let meta = TrainingMeta { epoch: 1, best_val_metric: None };
        let back = decode_checkpoint(&encode_checkpoint(&m, seed, meta, None, None).unwrap()).unwrap();
        for (p, q) in m.store.iter().zip(back.model.store.iter()) {
            prop_assert_eq!(p.name(), q.name());
            prop_assert_eq!(&p.value().to_f32_precision(), q.value());
        }
    }

    #[test]
    fn adam_from_rest_ignores_zero_gradients(values in prop::collection::vec(-5.0f64..5.0, 12), steps in 1usize..5, lr in 0.0f64..1.0) {
        let mut store = ParamStore::new();
        store.register("w", Tensor::matrix(3, 4, values.clone()).unwrap(), true).unwrap();
        let mut opt = OptimizerState::new(&store);
        for _ in 0..steps {
            store.zero_grads();
            adam_step(&mut store, &mut opt, lr);
        }
        let after = store.by_name("w").unwrap().value().data();
        prop_assert!(after.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn softmax_addressing_follows_scaled_logits(u in prop::collection::vec(-2.0f64..2.0, 4), c in 0.1f64..10.0, seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<f64> = (0..5 * 4).map(|_| g.random_range(-2.0..2.0)).collect();
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let k = tape.constant(Tensor::matrix(5, 4, keys.clone()).unwrap());
        let vals = tape.constant(Tensor::zeros(&[5, 1]));
        let bank = MemoryBank::new(&tape, k, vals, (0..5).map(|i| i.to_string()).collect(), vec![None; 5]).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * c).collect();
        let uv = tape.constant(Tensor::row(&scaled));
        let w = address(&mut tape, uv, &bank, &Addressing::Softmax).unwrap();

        // The same logits recomputed outside the tape.
        let logits: Vec<f64> = (0..5)
            .map(|i| scaled.iter().zip(&keys[i * 4..(i + 1) * 4]).map(|(a, b)| a * b).sum())
            .collect();
        let expected = memnet::autodiff::softmax_rows(&Tensor::row(&logits));
        prop_assert_eq!(tape.value(w).data(), expected.data());
    }

    #[test]
    fn eval_report_json_roundtrips(
        cells in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 2..12),
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 12),
    ) {
        let gold: Vec<Vec<usize>> = (0..cells.len())
            .map(|i| (0..4).filter(|&l| bits[i][l]).collect())
            .collect();
        let names: Vec<String> = (0..4).map(|i| format!("label {i}")).collect();
        if let Ok(report) = EvalReport::compute(&cells, &gold, &names) {
            let back: EvalReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
            prop_assert_eq!(back, report);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn synth_is_reproducible(seed in any::<u64>()) {
        let spec = SynthSpec { notes: 60, seed, ..SynthSpec::default() };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        prop_assert_eq!(serde_json::to_string(&a.notes).unwrap(), serde_json::to_string(&b.notes).unwrap());
        prop_assert_eq!(serde_json::to_string(&a.pages).unwrap(), serde_json::to_string(&b.pages).unwrap());
    }

    #[test]
    fn noiseless_single_label_notes_retrieve_their_page_first(seed in any::<u64>(), cap in 1usize..8) {
        let spec = SynthSpec { notes: 80, noise_rate: 0.0, max_labels: 1, mention_rate: 0.0, seed, ..SynthSpec::default() };
        let synth = synth_generate(&spec).unwrap();
        let pipeline = PipelineConfig { label_count: 5, retrieval_cap: cap, ..PipelineConfig::default() };
        let corpus = prepare(synth.parsed_notes(), &synth.kb_pages(), Stopwords::english(), pipeline).unwrap();
        for ex in corpus.splits.train.iter().chain(&corpus.splits.val) {
            prop_assert!(ex.slots.len() <= cap);
            prop_assert_eq!(corpus.kb.retrieve(&ex.words, cap), ex.slots.clone());
            let top = corpus.kb.slot(ex.slots[0]);
            prop_assert_eq!(top.label, Some(ex.labels[0]));
        }
    }
}
