//! From-scratch 1-D convolutional network engine with manual backpropagation.

pub mod gradcheck;
pub mod network;
pub mod ops;
pub mod optim;
pub mod tensor;

pub use network::{ForwardCache, GradientSet, InputShape, LayerParams, LayerSpec, Network, NetworkSpec, ParameterSet};
pub use ops::{Conv1dGeometry, Mode};
pub use optim::Sgd;
pub use tensor::{Scalar, Tensor};
