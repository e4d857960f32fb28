//! Reverse-mode automatic differentiation over dense `f64` arrays, with a
//! parameter store, Adam and finite-difference gradient checks.

mod array;
mod error;
mod gemm;
pub mod gradcheck;
mod graph;
mod optim;
mod params;

pub use array::Array;
pub use error::{AutodiffError, Result};
pub use graph::{Gradients, Graph, Var};
pub use optim::{step_decay_lr, Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
