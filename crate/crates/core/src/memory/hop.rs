use super::MemoryBank;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Input state `u` and condensed state `ũ` after a hop.
#[derive(Clone, Copy, Debug)]
pub struct HopState {
    pub u: Var,
    pub u_tilde: Var,
    /// 1-based.
    pub hop: usize,
}

/// `o = (weights · values) · c_transform`.
pub fn read(tape: &mut Tape<'_>, weights: Var, bank: &MemoryBank, c_transform: Var) -> Result<Var> {
    let ws = tape.shape(weights);
    if ws.len() != 2 || ws[0] != 1 || ws[1] != bank.len() {
        return Err(Error::Dimension {
            op: "read",
            left: ws.to_vec(),
            right: vec![1, bank.len()],
        });
    }
    let mixed = tape.matmul(weights, bank.values())?;
    tape.matmul(mixed, c_transform)
}

/// `u + o`.
pub fn hop_update(tape: &mut Tape<'_>, u: Var, o: Var) -> Result<Var> {
    tape.add(u, o)
}

/// Next condensed state: `u_next ⊕ ũ·D`, where `D` halves the width of `ũ`.
pub fn condense(tape: &mut Tape<'_>, state: &HopState, u_next: Var, d_k: Var) -> Result<Var> {
    let s = tape.shape(state.u_tilde)[1];
    let expected = (s, s / 2);
    let ds = tape.shape(d_k).to_vec();
    if ds.len() != 2 || (ds[0], ds[1]) != expected {
        return Err(Error::Schedule {
            hop: state.hop,
            expected,
            got: ds,
        });
    }
    let reduced = tape.matmul(state.u_tilde, d_k)?;
    tape.concat(u_next, reduced)
}

/// Unnormalised moving average with decay ½ over the state history, most
/// recent state first: `Σⱼ history[last − j] / 2ʲ`.
pub fn average_update(tape: &mut Tape<'_>, history: &[Var]) -> Result<Var> {
    let (&latest, earlier) = history
        .split_last()
        .ok_or_else(|| Error::Precondition("average_update needs a non-empty history".into()))?;
    let shape = tape.shape(latest).to_vec();
    let mut acc = latest;
    let mut weight = 1.0;
    for &prev in earlier.iter().rev() {
        if tape.shape(prev) != shape.as_slice() {
            return Err(Error::Dimension {
                op: "average_update",
                left: shape,
                right: tape.shape(prev).to_vec(),
            });
        }
        weight *= 0.5;
        let scaled = tape.scale(prev, weight);
        acc = tape.add(acc, scaled)?;
    }
    Ok(acc)
}

/// Width of the condensed state at each hop: `S₁ = K`, `S_{k+1} = K + ⌊S_k/2⌋`.
pub fn dim_schedule(k: usize, hops: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("state dimension must be at least 2, got {k}")));
    }
    if hops < 1 {
        return Err(Error::Config("hops must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(hops);
    out.push(k);
    for _ in 1..hops {
        let prev = *out.last().expect("non-empty");
        out.push(k + prev / 2);
    }
    Ok(out)
}
