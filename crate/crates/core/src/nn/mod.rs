//! Small differentiable substrate shared by the predictor and the vocoder.
//!
//! There is no tape: every op has an explicit forward and backward function
//! and the models chain them by hand. Layouts are fixed: dense activations
//! are `[batch, features]`, sequence activations are `[batch, channels, time]`,
//! dense weights are `[in, out]` and convolution kernels `[out, in, width]`.
//! All arithmetic is `f64`; checkpoints store `f32`.

mod adam;
pub mod checkpoint;
mod conv;
pub mod gradcheck;
mod init;
pub mod linalg;
mod ops;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::{conv1d_backward, conv1d_forward, ConvGrads};
pub use init::{uniform_init, xavier_limit};
pub use ops::{
    dense_backward, dense_forward, gate_backward, gate_forward, matmul, mse_loss, sigmoid,
    sigmoid_backward, tanh, tanh_backward, DenseGrads, GateCache, Transpose,
};
pub use params::{Param, ParamSet};
pub use tensor::Tensor;
