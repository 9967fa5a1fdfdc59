//! Minimal CPU tensor toolkit for the image-to-image networks.
//!
//! Layers are explicit forward/backward pairs rather than a general autograd
//! tape: every forward returns the cache its backward needs, and a network
//! composes them by hand. Tensors are dense NCHW buffers generic over
//! [`Real`] so the same code trains in `f32` and gradient-checks in `f64`.

mod adam;
mod layers;
mod params;
mod real;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{
    upsample_nearest2x, upsample_nearest2x_backward, Activation, BlockCache, Conv2d, ConvBlock,
    InstanceNorm, NormCache,
};
pub use params::{Grads, Param, ParamSet};
pub use real::{matmul, Real};
pub use tensor::Tensor;
