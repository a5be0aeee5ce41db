use rand::Rng;

use super::config::ModelConfig;
use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::rng;

pub const NOTE_EMBEDDING: &str = "note_embedding";
pub const NOTE_PROJECTION: &str = "note_projection";
pub const KEY_EMBEDDING: &str = "key_embedding";
pub const KEY_PROJECTION: &str = "key_projection";
pub const VALUE_EMBEDDING: &str = "value_embedding";
pub const VALUE_PROJECTION: &str = "value_projection";
pub const OUTPUT: &str = "output";
pub const GATE_HIDDEN_W: &str = "gate_hidden_w";
pub const GATE_HIDDEN_B: &str = "gate_hidden_b";
pub const GATE_OUT_W: &str = "gate_out_w";
pub const GATE_OUT_B: &str = "gate_out_b";

pub fn condenser_name(hop: usize) -> String {
    format!("condense_{hop}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateIds {
    pub hidden_w: ParamId,
    pub hidden_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryParams {
    /// Embeds page bodies into keys; the note table when tied.
    pub key_embedding: ParamId,
    pub key_projection: Option<ParamId>,
    /// Embeds titles (or bodies, for end-to-end) into values.
    pub value_embedding: ParamId,
    /// Maps a read value into the state space.
    pub value_projection: ParamId,
    /// One halving matrix per hop after the first (condensed variant only).
    pub condensers: Vec<ParamId>,
    pub gate: Option<GateIds>,
}

/// Typed handles to every learned matrix of a model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelParams {
    /// Embeds the note into the initial state.
    pub note_embedding: ParamId,
    pub note_projection: Option<ParamId>,
    /// Final state → label logits.
    pub output: ParamId,
    pub memory: Option<MemoryParams>,
}

/// Names and shapes of every parameter the configuration needs, in
/// registration order.
pub fn param_layout(cfg: &ModelConfig) -> Result<Vec<(String, [usize; 2])>> {
    cfg.validate()?;
    let k = cfg.embed_dim;
    let embed = cfg.note_embed_dim.unwrap_or(k);
    let mut out = vec![(NOTE_EMBEDDING.to_owned(), [cfg.vocab_size, embed])];
    if let Some(e) = cfg.note_embed_dim {
        out.push((NOTE_PROJECTION.to_owned(), [e, k]));
    }
    if cfg.variant.uses_memory() {
        if !cfg.tie_note_key {
            out.push((KEY_EMBEDDING.to_owned(), [cfg.vocab_size, embed]));
        }
        if let Some(e) = cfg.note_embed_dim {
            out.push((KEY_PROJECTION.to_owned(), [e, k]));
        }
        out.push((VALUE_EMBEDDING.to_owned(), [cfg.vocab_size, cfg.value_dim]));
        out.push((VALUE_PROJECTION.to_owned(), [cfg.value_dim, k]));
        let schedule = cfg.schedule()?;
        if cfg.variant == super::Variant::Condensed {
            for (i, s) in schedule.iter().take(cfg.hops - 1).enumerate() {
                out.push((condenser_name(i + 1), [*s, s / 2]));
            }
        }
        if cfg.uses_gate() {
            let h = cfg.gate_hidden;
            out.push((GATE_HIDDEN_W.to_owned(), [2 * k, h]));
            out.push((GATE_HIDDEN_B.to_owned(), [1, h]));
            out.push((GATE_OUT_W.to_owned(), [h, 1]));
            out.push((GATE_OUT_B.to_owned(), [1, 1]));
        }
    }
    out.push((OUTPUT.to_owned(), [cfg.final_dim()?, cfg.label_count]));
    Ok(out)
}

/// Fills every matrix i.i.d. uniform in `±√(6/(fan_in + fan_out))` from a
/// generator keyed by `(seed, parameter name)`.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<(ModelParams, ParamStore)> {
    let mut store = ParamStore::new();
    for (name, [rows, cols]) in param_layout(cfg)? {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let mut g = rng::stream(seed, &name);
        let data = (0..rows * cols).map(|_| g.random_range(-bound..bound)).collect();
        store.register(&name, Tensor::matrix(rows, cols, data)?, true)?;
    }
    let params = ModelParams::lookup(cfg, &store)?;
    Ok((params, store))
}

impl ModelParams {
    /// Resolves handles by name, checking every shape against the layout.
    pub fn lookup(cfg: &ModelConfig, store: &ParamStore) -> Result<Self> {
        let layout = param_layout(cfg)?;
        for (name, shape) in &layout {
            let p = store.by_name(name).ok_or_else(|| Error::CheckpointParam {
                param: name.clone(),
                message: "missing".into(),
            })?;
            if p.value().shape() != shape {
                return Err(Error::CheckpointParam {
                    param: name.clone(),
                    message: format!("shape {:?} does not match expected {:?}", p.value().shape(), shape),
                });
            }
        }
        if store.len() != layout.len() {
            let extra = store
                .iter()
                .find(|p| !layout.iter().any(|(n, _)| n == p.name()))
                .map(|p| p.name().to_owned())
                .unwrap_or_default();
            return Err(Error::CheckpointParam {
                param: extra,
                message: "not part of this model configuration".into(),
            });
        }
        let id = |n: &str| store.id(n).expect("checked above");
        let memory = cfg.variant.uses_memory().then(|| MemoryParams {
            key_embedding: if cfg.tie_note_key { id(NOTE_EMBEDDING) } else { id(KEY_EMBEDDING) },
            key_projection: store.id(KEY_PROJECTION),
            value_embedding: id(VALUE_EMBEDDING),
            value_projection: id(VALUE_PROJECTION),
            condensers: (1..cfg.hops).filter_map(|h| store.id(&condenser_name(h))).collect(),
            gate: cfg.uses_gate().then(|| GateIds {
                hidden_w: id(GATE_HIDDEN_W),
                hidden_b: id(GATE_HIDDEN_B),
                out_w: id(GATE_OUT_W),
                out_b: id(GATE_OUT_B),
            }),
        });
        Ok(ModelParams {
            note_embedding: id(NOTE_EMBEDDING),
            note_projection: store.id(NOTE_PROJECTION),
            output: id(OUTPUT),
            memory,
        })
    }
}
