//! Tape-based reverse-mode differentiation and gradient checking.

mod gradcheck;
mod surrogate;
mod tape;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use surrogate::{sigmoid, step, SurrogateConfig, SurrogateMode};
pub use tape::{Activation, Gradients, Tape, Var};
