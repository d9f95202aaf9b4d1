//! Tensors, reverse-mode differentiation, MLP layers and Adam.

mod adam;
mod mlp;
pub mod rng;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use mlp::{Activation, Layer, Mlp, MlpSpec, MlpVars};
pub use tape::{sigmoid, softmax_rows, softplus, Gradients, Tape, Var};
pub use tensor::Tensor;
