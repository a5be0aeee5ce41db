use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::{adam_step, clip_gradients, OptimizerState};
use crate::autodiff::{Mode, ParamStore, Tape};
use crate::corpus::{Corpus, Example, KnowledgeBase};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::models::{l2_penalty, Model, ModelConfig, NoteInput, Prediction};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    /// Note-weighted mean of the batch losses.
    pub mean_loss: f64,
    /// Loss of every batch (data term averaged over the batch, plus L2).
    pub batch_losses: Vec<f64>,
}

pub fn note_input<'a>(ex: &'a Example, kb: &'a KnowledgeBase) -> NoteInput<'a> {
    NoteInput {
        note: &ex.words,
        slots: ex.slots.iter().map(|&i| kb.slot(i)).collect(),
    }
}

/// One pass over `train` in a seeded order. Notes in a batch are processed
/// one after another, their gradients summed with weight `1/B`.
pub fn train_epoch(
    model: &mut Model,
    train: &[Example],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    epoch: usize,
) -> Result<EpochReport> {
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, &format!("shuffle/{epoch}")));
    let mut dropout_rng = rng::stream(cfg.seed, &format!("dropout/{epoch}"));

    let mut batch_losses = Vec::new();
    let mut weighted = 0.0;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        let scale = 1.0 / batch.len() as f64;
        model.store.zero_grads();
        let mut data_loss = 0.0;
        for &i in batch {
            let ex = &train[i];
            let (value, grads) = {
                let mut tape = Tape::new(&model.store);
                let input = note_input(ex, kb);
                let out = model.forward(&mut tape, &input, &mut Mode::Train(&mut dropout_rng))?;
                let loss = model.data_loss(&mut tape, &out, &ex.labels)?;
                (tape.scalar(loss), tape.backward_scaled(loss, scale)?)
            };
            data_loss += value * scale;
            model.store.accumulate(&grads);
        }
        let loss = data_loss + l2_penalty(&model.store, cfg.l2);
        if !loss.is_finite() {
            let norms: Vec<String> = model
                .store
                .value_norms()
                .into_iter()
                .map(|(n, v)| format!("{n}={v:.4e}"))
                .collect();
            return Err(Error::NonFinite {
                batch: b,
                diagnostics: norms.join(", "),
            });
        }
        add_l2_gradient(&mut model.store, cfg.l2);
        clip_gradients(&mut model.store, cfg.clip_norm);
        adam_step(&mut model.store, opt, cfg.learning_rate);
        batch_losses.push(loss);
        weighted += loss * batch.len() as f64;
    }
    Ok(EpochReport {
        mean_loss: weighted / train.len() as f64,
        batch_losses,
    })
}

/// Adds `2·l2·θ` to every trainable gradient. Same result as building the
/// penalty on the tape, without densifying the embedding gradients there.
pub(crate) fn add_l2_gradient(store: &mut ParamStore, l2: f64) {
    if l2 == 0.0 {
        return;
    }
    for p in store.iter_mut().filter(|p| p.trainable) {
        let theta = p.value().data().to_vec();
        for (g, t) in p.grad_mut().iter_mut().zip(theta) {
            *g += 2.0 * l2 * t;
        }
    }
}

/// Eval-mode predictions for every example, in order.
pub fn predict_all(model: &Model, examples: &[Example], kb: &KnowledgeBase) -> Result<Vec<Prediction>> {
    examples.iter().map(|ex| model.predict(&note_input(ex, kb))).collect()
}

pub fn evaluate(model: &Model, examples: &[Example], kb: &KnowledgeBase, label_names: &[String]) -> Result<EvalReport> {
    let preds = predict_all(model, examples, kb)?;
    let scores: Vec<Vec<f64>> = preds.into_iter().map(|p| p.probabilities).collect();
    let gold: Vec<Vec<usize>> = examples.iter().map(|e| e.labels.clone()).collect();
    EvalReport::compute(&scores, &gold, label_names)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc_macro: f64,
    pub val_p_at_5: f64,
    pub val_hamming: f64,
}

/// Tracks the best validation score; ties keep the earlier epoch.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch; returns whether it is the new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        match self.best {
            Some((_, b)) if metric <= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, metric));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience > 0 && self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters of the best validation epoch (the initial model when no
    /// epoch ran).
    pub best: Model,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val_p_at_5: f64,
    pub history: Vec<HistoryRow>,
    pub batch_losses: Vec<Vec<f64>>,
    pub last: Model,
    pub optimizer: OptimizerState,
}

/// Trains on `corpus.splits.train` and selects on `corpus.splits.val`.
/// The test split is never opened.
pub fn fit(model_cfg: &ModelConfig, corpus: &Corpus, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    let splits = &corpus.splits;
    if splits.val.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    let mut model = Model::new(model_cfg.clone(), cfg.seed)?;
    let mut opt = OptimizerState::new(&model.store);
    let mut best = model.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    let mut batch_losses = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let report = train_epoch(&mut model, &splits.train, &corpus.kb, cfg, &mut opt, epoch)?;
        let val = evaluate(&model, &splits.val, &corpus.kb, corpus.labels.labels())?;
        log::info!(
            "epoch {epoch}: loss {:.5} val auc {:.4} p@5 {:.4} hamming {:.4}",
            report.mean_loss,
            val.auc_macro,
            val.precision_at_5,
            val.hamming_loss
        );
        history.push(HistoryRow {
            epoch,
            train_loss: report.mean_loss,
            val_auc_macro: val.auc_macro,
            val_p_at_5: val.precision_at_5,
            val_hamming: val.hamming_loss,
        });
        batch_losses.push(report.batch_losses);
        if stopper.observe(epoch, val.precision_at_5) {
            best = model.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    let (best_epoch, best_val_p_at_5) = stopper.best().unwrap_or((0, f64::NAN));
    Ok(FitResult {
        best,
        best_epoch,
        best_val_p_at_5,
        history,
        batch_losses,
        last: model,
        optimizer: opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_stops_after_one_worsening_epoch() {
        let mut s = EarlyStopping::new(1);
        let metrics = [0.5, 0.4, 0.3, 0.2];
        let mut ran = 0;
        for (i, m) in metrics.iter().enumerate() {
            ran += 1;
            s.observe(i + 1, *m);
            if s.should_stop() {
                break;
            }
        }
        assert_eq!(ran, 2);
        assert_eq!(s.best(), Some((1, 0.5)));
    }

    #[test]
    fn analytic_l2_gradient_matches_the_tape() {
        use crate::memory::{AddressingKind, SlotText};
        use crate::models::Variant;

        let cfg = ModelConfig {
            variant: Variant::Averaged,
            hops: 2,
            embed_dim: 4,
            value_dim: 3,
            label_count: 3,
            vocab_size: 12,
            addressing: AddressingKind::Gated,
            gate_hidden: 3,
            dropout: 0.0,
            ..ModelConfig::default()
        };
        let mut model = Model::new(cfg, 3).unwrap();
        let slots = [SlotText { id: "p".into(), body: vec![2, 5], title: vec![7], label: Some(0) }];
        let input = NoteInput { note: &[3, 4, 9], slots: slots.iter().collect() };
        let l2 = 0.01;

        let grads = |with_l2: f64, store: &ParamStore| {
            let mut tape = Tape::new(store);
            let out = model.forward(&mut tape, &input, &mut Mode::Eval).unwrap();
            let loss = model.loss(&mut tape, &out, &[0, 2], with_l2).unwrap();
            tape.backward(loss).unwrap()
        };
        let on_tape = grads(l2, &model.store);
        let data_only = grads(0.0, &model.store);
        let mut store = std::mem::take(&mut model.store);
        store.zero_grads();
        store.accumulate(&data_only);
        add_l2_gradient(&mut store, l2);
        for id in store.ids() {
            let expected = on_tape.get(id).unwrap().to_dense();
            for (a, b) in store.get(id).grad().data().iter().zip(expected.data()) {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{}: {a} vs {b}", store.get(id).name());
            }
        }
    }

    #[test]
    fn ties_keep_the_earlier_epoch() {
        let mut s = EarlyStopping::new(0);
        assert!(s.observe(1, 0.3));
        assert!(!s.observe(2, 0.3));
        assert!(s.observe(3, 0.31));
        assert!(!s.should_stop());
        assert_eq!(s.best(), Some((3, 0.31)));
    }
}
