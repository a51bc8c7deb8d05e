//! Reverse-mode neural network engine used by the moldline soft sensor.
//!
//! Everything here works on batched `f64` tensors in row-major (NHWC for
//! images) layout. Layers cache what they need during `forward` and consume
//! it in `backward`; there is no general autograd graph. Two model families
//! are provided:
//!
//! * [`network::Network`]: feed-forward stacks of dense, convolution,
//!   max-pool, ReLU, dropout and flatten layers, described by a
//!   [`network::NetworkSpec`].
//! * [`lstm::LstmNetwork`]: one or two stacked LSTM layers with a dense
//!   regression head, trained with full backpropagation through time.
//!
//! Both train through the same minibatch loop in [`train`].

pub mod arch;
mod error;
mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod network;
pub mod optim;
pub mod rng;
mod tensor;
pub mod train;

pub use error::{NnError, Result};
pub use tensor::{Param, Tensor};
