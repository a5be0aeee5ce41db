//! Memory-network variants assembled from the hop primitives.
//!
//! [`Model::forward`] embeds a note, runs the configured number of hops over
//! the retrieved pages and maps the (possibly condensed) state to independent
//! per-label probabilities.

mod check;
mod config;
mod model;
pub mod params;
mod prediction;

pub use check::{model_grad_check, CheckDims};
pub use config::{ModelConfig, SlotSupervision, Variant};
pub use model::{l2_penalty, ForwardOutput, Model, NoteInput};
pub use params::{init_params, param_layout, ModelParams};
pub use prediction::{predict_topk, rank_labels, Prediction};
