//! Tensors, reverse-mode differentiation and training primitives.

pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tensor;

pub use gradcheck::gradient_check;
pub use graph::{huber_term, Gradients, Graph, Op, Var};
pub use optim::{AdamConfig, OptimizerState};
pub use params::ParamStore;
pub use tensor::{DType, Element, Tensor};
