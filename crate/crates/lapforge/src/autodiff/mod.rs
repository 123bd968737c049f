//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Everything the network and losses need is expressed through the tape
//! primitives in [`tape`]; [`perceptron`] layers small dense networks on
//! top; [`gradcheck`] provides the central-difference machinery the test
//! suites use to validate every backward rule.

pub mod gradcheck;
pub mod perceptron;
pub mod tape;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use perceptron::{Activation, BoundPerceptron, Layer, Perceptron};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
