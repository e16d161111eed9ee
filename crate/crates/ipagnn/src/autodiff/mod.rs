//! Minimal tape-based reverse-mode automatic differentiation over dense
//! tensors: the numeric substrate for every model in the crate.

mod check;
mod tape;
mod tensor;

pub use check::{grad_check, max_relative_error, GradCheckReport};
pub use tape::{Tape, ValueId};
pub use tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Element, Tensor};
