//! Minimal reverse-mode automatic differentiation.
//!
//! Values are dense row-major matrices of `f64`. A [`Tape`] records every
//! operation eagerly (the forward value is computed when the node is pushed)
//! and [`Tape::backward`] sweeps the nodes in reverse to accumulate adjoints.
//! The op set is deliberately small: it covers what the hash-grid encoded
//! networks need (matrix products, gathers, smooth activations and
//! reductions) and nothing more.

mod adam;
mod error;
mod gradcheck;
pub mod kernels;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use error::AutodiffError;
pub use gradcheck::{grad_check, grad_check_coords};
pub use tape::{Gradients, Tape, Unary, Var};
