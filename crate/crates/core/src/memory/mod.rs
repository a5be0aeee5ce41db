//! Hop mechanics over key/value memory.
//!
//! A hop addresses the memory with the current state, reads a weighted value
//! vector, and adds it to the state. The condensed state either grows by
//! concatenating halved projections of earlier states ([`condense`]) or keeps a
//! decaying sum of them ([`average_update`]).

mod addressing;
mod bank;
mod hop;

pub use addressing::{activate, address, address_scores, Addressing, AddressingKind, GateParams};
pub use bank::{MemoryBank, SlotText};
pub use hop::{average_update, condense, dim_schedule, hop_update, read, HopState};
