use serde::{Deserialize, Serialize};

use super::MemoryBank;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressingKind {
    Softmax,
    Sigmoid,
    Gated,
}

impl std::str::FromStr for AddressingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax" => Ok(AddressingKind::Softmax),
            "sigmoid" => Ok(AddressingKind::Sigmoid),
            "gated" => Ok(AddressingKind::Gated),
            other => Err(Error::Config(format!("unknown addressing `{other}`"))),
        }
    }
}

impl std::fmt::Display for AddressingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AddressingKind::Softmax => "softmax",
            AddressingKind::Sigmoid => "sigmoid",
            AddressingKind::Gated => "gated",
        })
    }
}

/// Weights of the gate scorer `σ(tanh([u ⊕ key]·W₁ + b₁)·w₂ + b₂)`.
///
/// `hidden_w` is `2K×h`: its first K rows act on `u`, the last K on the key.
#[derive(Clone, Copy, Debug)]
pub struct GateParams {
    pub hidden_w: Var,
    pub hidden_b: Var,
    pub out_w: Var,
    pub out_b: Var,
}

/// Addressing function; gate weights exist only for the gated kind.
#[derive(Clone, Copy, Debug)]
pub enum Addressing {
    Softmax,
    Sigmoid,
    Gated(GateParams),
}

impl Addressing {
    pub fn kind(&self) -> AddressingKind {
        match self {
            Addressing::Softmax => AddressingKind::Softmax,
            Addressing::Sigmoid => AddressingKind::Sigmoid,
            Addressing::Gated(_) => AddressingKind::Gated,
        }
    }
}

/// Relevance weight of every slot for the state `u` (`1×K`), as a `1×M` row.
pub fn address(tape: &mut Tape<'_>, u: Var, bank: &MemoryBank, scheme: &Addressing) -> Result<Var> {
    let scores = address_scores(tape, u, bank, scheme)?;
    activate(tape, scores, scheme.kind())
}

/// Pre-activation slot scores: `u·kᵢ`, or the gate's output before its
/// final sigmoid.
pub fn address_scores(tape: &mut Tape<'_>, u: Var, bank: &MemoryBank, scheme: &Addressing) -> Result<Var> {
    let (us, ks) = (tape.shape(u).to_vec(), tape.shape(bank.keys()).to_vec());
    if us.len() != 2 || us[0] != 1 || us[1] != ks[1] {
        return Err(Error::Dimension {
            op: "address",
            left: us,
            right: ks,
        });
    }
    match scheme {
        Addressing::Softmax | Addressing::Sigmoid => dot_keys(tape, u, bank),
        Addressing::Gated(gate) => gate_scores(tape, u, bank, gate),
    }
}

/// Turns scores into weights: softmax across slots, or an independent
/// sigmoid per slot for the sigmoid and gated kinds.
pub fn activate(tape: &mut Tape<'_>, scores: Var, kind: AddressingKind) -> Result<Var> {
    match kind {
        AddressingKind::Softmax => tape.softmax_row(scores),
        AddressingKind::Sigmoid | AddressingKind::Gated => Ok(tape.sigmoid(scores)),
    }
}

fn dot_keys(tape: &mut Tape<'_>, u: Var, bank: &MemoryBank) -> Result<Var> {
    let kt = tape.transpose(bank.keys())?;
    tape.matmul(u, kt)
}

// [u ⊕ kᵢ]·W₁ = u·W₁[..K] + kᵢ·W₁[K..], evaluated for all slots at once.
fn gate_scores(tape: &mut Tape<'_>, u: Var, bank: &MemoryBank, gate: &GateParams) -> Result<Var> {
    let k = tape.shape(u)[1];
    let ws = tape.shape(gate.hidden_w).to_vec();
    if ws.len() != 2 || ws[0] != 2 * k {
        return Err(Error::Dimension {
            op: "gated_address",
            left: vec![1, 2 * k],
            right: ws,
        });
    }
    let w_state = tape.slice_rows(gate.hidden_w, 0, k)?;
    let w_key = tape.slice_rows(gate.hidden_w, k, k)?;
    let from_state = tape.matmul(u, w_state)?;
    let from_state = tape.add(from_state, gate.hidden_b)?;
    let from_keys = tape.matmul(bank.keys(), w_key)?;
    let pre = tape.add_row(from_keys, from_state)?;
    let hidden = tape.tanh(pre);
    let score = tape.matmul(hidden, gate.out_w)?;
    let score = tape.add_row(score, gate.out_b)?;
    tape.transpose(score)
}
