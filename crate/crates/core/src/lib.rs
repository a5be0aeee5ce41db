//! Memory networks (end-to-end, key-value, averaged and condensed) for
//! multi-label classification of notes against a knowledge base, on a small
//! reverse-mode autodiff core.

pub mod autodiff;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod kvconfig;
pub mod memory;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
