use std::collections::HashSet;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Token ids of one knowledge-base page, ready to be embedded into a slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotText {
    /// Page identifier (its title).
    pub id: String,
    /// Body token ids; embedded into the key.
    pub body: Vec<usize>,
    /// Title token ids; embedded into the value.
    pub title: Vec<usize>,
    /// Index of the label this page describes, if it is in the label space.
    pub label: Option<usize>,
}

/// Embedded key/value slots for one forward pass.
///
/// Keys are `M×d` and values `M×d_v`; both are tape nodes so gradients reach
/// the embedding matrices they came from.
#[derive(Clone, Debug)]
pub struct MemoryBank {
    keys: Var,
    values: Var,
    slot_ids: Vec<String>,
    label_alignment: Vec<Option<usize>>,
}

impl MemoryBank {
    pub fn new(
        tape: &Tape<'_>,
        keys: Var,
        values: Var,
        slot_ids: Vec<String>,
        label_alignment: Vec<Option<usize>>,
    ) -> Result<Self> {
        let (ks, vs) = (tape.shape(keys), tape.shape(values));
        let m = slot_ids.len();
        if m == 0 {
            return Err(Error::EmptyInput("memory bank needs at least one slot".into()));
        }
        if ks.len() != 2 || vs.len() != 2 || ks[0] != m || vs[0] != m || label_alignment.len() != m {
            return Err(Error::Dimension {
                op: "memory_bank",
                left: ks.to_vec(),
                right: vs.to_vec(),
            });
        }
        let mut seen = HashSet::with_capacity(m);
        for id in &slot_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate memory slot `{id}`")));
            }
        }
        Ok(MemoryBank {
            keys,
            values,
            slot_ids,
            label_alignment,
        })
    }

    pub fn keys(&self) -> Var {
        self.keys
    }

    pub fn values(&self) -> Var {
        self.values
    }

    pub fn len(&self) -> usize {
        self.slot_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_ids.is_empty()
    }

    pub fn slot_ids(&self) -> &[String] {
        &self.slot_ids
    }

    pub fn label_alignment(&self) -> &[Option<usize>] {
        &self.label_alignment
    }

    /// Positions of slots whose aligned label is in `gold`.
    pub fn gold_slots(&self, gold: &[usize]) -> Vec<usize> {
        self.label_alignment
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.filter(|l| gold.contains(l)).map(|_| i))
            .collect()
    }
}
