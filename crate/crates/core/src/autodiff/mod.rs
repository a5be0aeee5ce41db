//! Minimal dense-tensor arithmetic with reverse-mode differentiation.
//!
//! [`Tape`] records a forward pass over `f64` tensors; parameters live in a
//! [`ParamStore`] and receive gradients through [`Gradients`].
//! [`grad_check`] verifies any graph against central finite differences.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport, ParamCheck};
pub use params::{Gradients, ParamGrad, ParamId, ParamStore, Parameter};
pub use tape::{Mode, Tape, Var, BCE_CLAMP};
pub use tensor::{matmul, sigmoid_scalar, softmax_rows, transpose, Tensor};
