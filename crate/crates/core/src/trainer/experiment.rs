use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::corpus::{Corpus, PipelineConfig};
use crate::error::Result;
use crate::kvconfig::KvConfig;
use crate::models::ModelConfig;

/// Everything a `train` config file can set.
///
/// `label_count` and `retrieval_cap` live in the pipeline; the model's copies
/// and its vocabulary size are filled in from the prepared corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "model",
    "hops",
    "embed_dim",
    "value_dim",
    "note_embed_dim",
    "tie_note_key",
    "addressing",
    "gate_hidden",
    "dropout",
    "slot_supervision",
    "label_count",
    "retrieval_cap",
    "truncate",
    "vocab_cap",
    "split_seed",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "l2",
    "clip_norm",
    "seed",
    "patience",
];

impl ExperimentConfig {
    /// Defaults overridden by the keys present; unknown keys are an error.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        kv.reject_unknown(EXPERIMENT_KEYS)?;
        let mut c = ExperimentConfig::default();
        let m = &mut c.model;
        kv.set("model", &mut m.variant)?;
        kv.set("hops", &mut m.hops)?;
        kv.set("embed_dim", &mut m.embed_dim)?;
        kv.set("value_dim", &mut m.value_dim)?;
        if kv.get("note_embed_dim").is_some() {
            let mut d = 0usize;
            kv.set("note_embed_dim", &mut d)?;
            m.note_embed_dim = Some(d);
        }
        kv.set("tie_note_key", &mut m.tie_note_key)?;
        kv.set("addressing", &mut m.addressing)?;
        kv.set("gate_hidden", &mut m.gate_hidden)?;
        kv.set("dropout", &mut m.dropout)?;
        kv.set("slot_supervision", &mut m.slot_supervision)?;
        let p = &mut c.pipeline;
        kv.set("label_count", &mut p.label_count)?;
        kv.set("retrieval_cap", &mut p.retrieval_cap)?;
        kv.set("truncate", &mut p.truncate)?;
        kv.set("vocab_cap", &mut p.vocab_cap)?;
        kv.set("split_seed", &mut p.split_seed)?;
        let t = &mut c.train;
        kv.set("learning_rate", &mut t.learning_rate)?;
        kv.set("batch_size", &mut t.batch_size)?;
        kv.set("max_epochs", &mut t.max_epochs)?;
        kv.set("l2", &mut t.l2)?;
        kv.set("clip_norm", &mut t.clip_norm)?;
        kv.set("seed", &mut t.seed)?;
        kv.set("patience", &mut t.patience)?;
        c.model.label_count = c.pipeline.label_count;
        c.model.retrieval_cap = c.pipeline.retrieval_cap;
        c.train.validate()?;
        Ok(c)
    }

    /// The model configuration sized for a prepared corpus.
    pub fn model_for(&self, corpus: &Corpus) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            label_count: corpus.labels.len(),
            vocab_size: corpus.vocab.len(),
            retrieval_cap: corpus.config.retrieval_cap,
            ..self.model.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
