use super::config::{ModelConfig, SlotSupervision, Variant};
use super::params::{init_params, ModelParams};
use crate::autodiff::{Mode, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::memory::{
    activate, address_scores, average_update, condense, hop_update, read, Addressing, AddressingKind, GateParams, HopState,
    MemoryBank, SlotText,
};

/// One note ready for a forward pass: its word ids and the retrieved pages.
#[derive(Clone, Debug)]
pub struct NoteInput<'a> {
    pub note: &'a [usize],
    pub slots: Vec<&'a SlotText>,
}

/// Tape handles produced by [`Model::forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// `1×R` label probabilities.
    pub probabilities: Var,
    /// `1×R` label logits, before the sigmoid.
    pub logits: Var,
    /// Addressing weights of every hop, first hop first.
    pub hop_weights: Vec<Var>,
    /// Addressing scores of every hop, before the softmax or sigmoid.
    pub hop_scores: Vec<Var>,
    /// State fed to the output layer (before dropout).
    pub final_state: Var,
    pub slot_ids: Vec<String>,
    pub slot_labels: Vec<Option<usize>>,
}

/// Configuration, parameter values and typed handles into them.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub store: ParamStore,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let (params, store) = init_params(&config, seed)?;
        Ok(Model { config, params, store })
    }

    /// Wraps an existing store, validating names and shapes.
    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let params = ModelParams::lookup(&config, &store)?;
        Ok(Model { config, params, store })
    }

    fn embed_row(&self, tape: &mut Tape<'_>, table: crate::autodiff::ParamId, proj: Option<crate::autodiff::ParamId>, bags: &[Vec<usize>]) -> Result<Var> {
        let t = tape.param(table);
        let e = tape.embedding_bags(t, bags)?;
        match proj {
            Some(p) => {
                let p = tape.param(p);
                tape.matmul(e, p)
            }
            None => Ok(e),
        }
    }

    /// Builds the memory for the retrieved pages. Keys always embed the page
    /// body; values embed the title, except end-to-end where they embed the
    /// body as well.
    pub fn build_bank(&self, tape: &mut Tape<'_>, slots: &[&SlotText]) -> Result<MemoryBank> {
        let mem = self
            .params
            .memory
            .as_ref()
            .ok_or_else(|| Error::Config(format!("variant {} has no memory", self.config.variant)))?;
        if slots.is_empty() {
            return Err(Error::EmptyInput("no memory slots retrieved".into()));
        }
        let bodies: Vec<Vec<usize>> = slots.iter().map(|s| s.body.clone()).collect();
        let keys = self.embed_row(tape, mem.key_embedding, mem.key_projection, &bodies)?;
        let value_bags: Vec<Vec<usize>> = if self.config.variant == Variant::EndToEnd {
            bodies
        } else {
            slots.iter().map(|s| s.title.clone()).collect()
        };
        let table = tape.param(mem.value_embedding);
        let values = tape.embedding_bags(table, &value_bags)?;
        MemoryBank::new(
            tape,
            keys,
            values,
            slots.iter().map(|s| s.id.clone()).collect(),
            slots.iter().map(|s| s.label).collect(),
        )
    }

    fn addressing(&self, tape: &mut Tape<'_>) -> Addressing {
        match self.config.addressing {
            AddressingKind::Softmax => Addressing::Softmax,
            AddressingKind::Sigmoid => Addressing::Sigmoid,
            AddressingKind::Gated => {
                let g = self
                    .params
                    .memory
                    .as_ref()
                    .and_then(|m| m.gate)
                    .expect("gate parameters exist for gated addressing");
                Addressing::Gated(GateParams {
                    hidden_w: tape.param(g.hidden_w),
                    hidden_b: tape.param(g.hidden_b),
                    out_w: tape.param(g.out_w),
                    out_b: tape.param(g.out_b),
                })
            }
        }
    }

    /// Runs every hop and the output layer.
    ///
    /// With `H` hops the model reads memory `H` times, producing states
    /// `u², …, u^{H+1}`. The condensed state starts as `u²` and each later hop
    /// concatenates the new state with the halved previous condensed state, so
    /// its final width is the last entry of the schedule. The averaged state
    /// is the decaying sum over the same post-hop states.
    pub fn forward(&self, tape: &mut Tape<'_>, input: &NoteInput<'_>, mode: &mut Mode<'_>) -> Result<ForwardOutput> {
        if input.note.is_empty() {
            return Err(Error::EmptyInput("note has no tokens after preprocessing".into()));
        }
        let cfg = &self.config;
        let mut u = self.embed_row(
            tape,
            self.params.note_embedding,
            self.params.note_projection,
            &[input.note.to_vec()],
        )?;
        let (mut hop_weights, mut hop_scores) = (Vec::new(), Vec::new());
        let (mut slot_ids, mut slot_labels) = (Vec::new(), Vec::new());

        let final_state = match &self.params.memory {
            None => u,
            Some(mem) => {
                let bank = self.build_bank(tape, &input.slots)?;
                let scheme = self.addressing(tape);
                let c_out = tape.param(mem.value_projection);
                let condensers: Vec<Var> = mem.condensers.iter().map(|&d| tape.param(d)).collect();
                let mut history = Vec::with_capacity(cfg.hops);
                let mut u_tilde = u;
                for hop in 1..=cfg.hops {
                    let scores = address_scores(tape, u, &bank, &scheme)?;
                    let w = activate(tape, scores, cfg.addressing)?;
                    let o = read(tape, w, &bank, c_out)?;
                    let u_next = hop_update(tape, u, o)?;
                    hop_weights.push(w);
                    hop_scores.push(scores);
                    u_tilde = match cfg.variant {
                        Variant::Condensed if hop > 1 => {
                            let state = HopState { u, u_tilde, hop };
                            condense(tape, &state, u_next, condensers[hop - 2])?
                        }
                        Variant::Averaged => {
                            history.push(u_next);
                            average_update(tape, &history)?
                        }
                        _ => u_next,
                    };
                    u = u_next;
                }
                slot_ids = bank.slot_ids().to_vec();
                slot_labels = bank.label_alignment().to_vec();
                u_tilde
            }
        };

        let dropped = tape.dropout(final_state, cfg.dropout, mode)?;
        let w = tape.param(self.params.output);
        let logits = tape.matmul(dropped, w)?;
        let probabilities = tape.sigmoid(logits);
        Ok(ForwardOutput {
            probabilities,
            logits,
            hop_weights,
            hop_scores,
            final_state,
            slot_ids,
            slot_labels,
        })
    }

    /// Label cross-entropy plus addressing cross-entropy on slots aligned
    /// with gold labels. The slot term is skipped when no retrieved page is
    /// aligned with a gold label. Both are computed from the pre-activation
    /// scores, which gives the same value as the clamped cross-entropy of the
    /// probabilities without losing precision near saturation.
    pub fn data_loss(&self, tape: &mut Tape<'_>, out: &ForwardOutput, gold: &[usize]) -> Result<Var> {
        if gold.is_empty() {
            return Err(Error::Data("note has no gold labels".into()));
        }
        let r = self.config.label_count;
        let mut targets = vec![0.0; r];
        for &g in gold {
            if g >= r {
                return Err(Error::Data(format!("gold label {g} outside {r} labels")));
            }
            targets[g] = 1.0;
        }
        let mut total = tape.sigmoid_bce_mean(out.logits, &targets)?;

        let slot_targets: Vec<f64> = out
            .slot_labels
            .iter()
            .map(|l| if l.is_some_and(|l| gold.contains(&l)) { 1.0 } else { 0.0 })
            .collect();
        if out.hop_scores.is_empty() || !slot_targets.contains(&1.0) {
            return Ok(total);
        }
        let hops: &[Var] = match self.config.slot_supervision {
            SlotSupervision::Off => &[],
            SlotSupervision::LastHop => &out.hop_scores[out.hop_scores.len() - 1..],
            SlotSupervision::AllHops => &out.hop_scores,
        };
        for &scores in hops {
            let term = match self.config.addressing {
                AddressingKind::Softmax => tape.softmax_bce_mean(scores, &slot_targets)?,
                AddressingKind::Sigmoid | AddressingKind::Gated => tape.sigmoid_bce_mean(scores, &slot_targets)?,
            };
            total = tape.add(total, term)?;
        }
        Ok(total)
    }

    /// [`Model::data_loss`] plus `l2 · Σ‖θ‖²` over every trainable parameter
    /// of the tape's store, all on the tape.
    pub fn loss(&self, tape: &mut Tape<'_>, out: &ForwardOutput, gold: &[usize], l2: f64) -> Result<Var> {
        let mut total = self.data_loss(tape, out, gold)?;
        if l2 != 0.0 {
            let store = tape.params();
            for id in store.ids().collect::<Vec<_>>() {
                if !store.get(id).trainable {
                    continue;
                }
                let p = tape.param(id);
                let sq = tape.sum_squares(p);
                let term = tape.scale(sq, l2);
                total = tape.add(total, term)?;
            }
        }
        Ok(total)
    }
}

/// `l2 · Σ‖θ‖²` over the trainable parameters of a store.
pub fn l2_penalty(store: &ParamStore, l2: f64) -> f64 {
    l2 * store.sum_squares()
}
