//! SARCoN: a hybrid time-series classifier joining a self-attentive LSTM
//! branch with a fully convolutional branch, trained end to end on an
//! in-crate reverse-mode differentiation engine.
//!
//! The numeric core is generic over [`Scalar`] (`f32` / `f64`); the type
//! aliases below fix the precision for common uses.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{Architecture, ConvSpec, ModelConfig, ModelVars, SarconModel};
pub use scalar::Scalar;
pub use tensor::{Gradients, Padding, Tape, Tensor, Var};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = SarconModel<f32>;
pub type Model64 = SarconModel<f64>;
