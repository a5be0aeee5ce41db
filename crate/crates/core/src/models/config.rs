use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{dim_schedule, AddressingKind};

/// Model family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Single memory: page bodies serve as both keys and values.
    #[serde(rename = "end_to_end")]
    EndToEnd,
    /// Page bodies as keys, page titles as values.
    #[serde(rename = "kv")]
    KeyValue,
    /// Key-value memory plus a decaying sum of per-hop states.
    #[serde(rename = "a_memnn")]
    Averaged,
    /// Key-value memory plus the concatenated, successively halved state.
    #[serde(rename = "c_memnn")]
    Condensed,
    /// No memory at all: logistic regression over the summed note embedding.
    #[serde(rename = "bow")]
    BagOfWords,
}

impl Variant {
    pub const MEMORY_VARIANTS: [Variant; 4] = [
        Variant::EndToEnd,
        Variant::KeyValue,
        Variant::Averaged,
        Variant::Condensed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::EndToEnd => "end_to_end",
            Variant::KeyValue => "kv",
            Variant::Averaged => "a_memnn",
            Variant::Condensed => "c_memnn",
            Variant::BagOfWords => "bow",
        }
    }

    pub fn uses_memory(self) -> bool {
        self != Variant::BagOfWords
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "end_to_end" | "e2e" => Ok(Variant::EndToEnd),
            "kv" | "kv_memnn" | "key_value" => Ok(Variant::KeyValue),
            "a_memnn" | "averaged" => Ok(Variant::Averaged),
            "c_memnn" | "condensed" => Ok(Variant::Condensed),
            "bow" | "bag_of_words" => Ok(Variant::BagOfWords),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// Which hops receive the addressing cross-entropy term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotSupervision {
    Off,
    LastHop,
    AllHops,
}

impl std::str::FromStr for SlotSupervision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "off" | "none" => Ok(SlotSupervision::Off),
            "last" | "last_hop" => Ok(SlotSupervision::LastHop),
            "all" | "all_hops" => Ok(SlotSupervision::AllHops),
            other => Err(Error::Config(format!("unknown slot supervision `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hops: usize,
    /// Interaction dimension `K` shared by note state and keys.
    pub embed_dim: usize,
    /// Title (value) embedding dimension.
    pub value_dim: usize,
    /// When set, notes and pages are embedded at this width and projected
    /// down to `embed_dim` by a learned matrix.
    pub note_embed_dim: Option<usize>,
    /// Embed notes and page bodies with one shared table instead of two.
    #[serde(default)]
    pub tie_note_key: bool,
    pub addressing: AddressingKind,
    /// Hidden width of the gate scorer.
    pub gate_hidden: usize,
    pub label_count: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    pub retrieval_cap: usize,
    pub slot_supervision: SlotSupervision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Condensed,
            hops: 3,
            embed_dim: 300,
            value_dim: 32,
            note_embed_dim: None,
            tie_note_key: false,
            addressing: AddressingKind::Softmax,
            gate_hidden: 128,
            label_count: 50,
            vocab_size: 20_002,
            dropout: 0.5,
            retrieval_cap: 64,
            slot_supervision: SlotSupervision::LastHop,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hops < 1 {
            return fail("hops must be at least 1".into());
        }
        if self.embed_dim < 2 {
            return fail(format!("embed_dim must be at least 2, got {}", self.embed_dim));
        }
        if self.value_dim < 1 {
            return fail("value_dim must be at least 1".into());
        }
        if self.note_embed_dim == Some(0) {
            return fail("note_embed_dim must be positive when set".into());
        }
        if self.label_count < 2 {
            return fail(format!("label_count must be at least 2, got {}", self.label_count));
        }
        if self.vocab_size < 1 {
            return fail("vocab_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.retrieval_cap < 1 {
            return fail("retrieval_cap must be at least 1".into());
        }
        if self.addressing == AddressingKind::Gated && self.gate_hidden < 1 {
            return fail("gate_hidden must be at least 1".into());
        }
        Ok(())
    }

    /// Condensed-state widths per hop; constant `K` for non-condensing variants.
    pub fn schedule(&self) -> Result<Vec<usize>> {
        match self.variant {
            Variant::Condensed => dim_schedule(self.embed_dim, self.hops),
            _ => Ok(vec![self.embed_dim; self.hops]),
        }
    }

    /// Width of the state fed to the output layer.
    pub fn final_dim(&self) -> Result<usize> {
        Ok(*self.schedule()?.last().expect("hops >= 1"))
    }

    pub fn uses_gate(&self) -> bool {
        self.variant.uses_memory() && self.addressing == AddressingKind::Gated
    }
}
