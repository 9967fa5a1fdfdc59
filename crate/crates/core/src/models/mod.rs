//! Generator and patch discriminator networks plus their checkpoint format.
//!
//! The generator is a resolution-preserving ResNet: a 7×7 stem, two stride-2
//! downsampling convolutions, a stack of residual blocks, two nearest ×2
//! upsampling stages and a 7×7 `tanh` head. The discriminator is a five-layer
//! 4×4 PatchGAN (strides 2, 2, 2, 1, 1) whose logits each see a 70×70 patch.
//! Widths are configurable; the defaults are the full-size networks.

mod checkpoint;
mod discriminator;
mod generator;

pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC,
};
pub use discriminator::{Discriminator, DiscriminatorCache, DiscriminatorConfig, PatchGrid};
pub use generator::{Generator, GeneratorCache, GeneratorConfig};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::{ParamSet, Real};
use crate::rng;

/// Standard deviation of the initial convolution weights.
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Generator,
    Discriminator,
}

impl NetworkKind {
    pub fn tag(self) -> &'static str {
        match self {
            NetworkKind::Generator => "generator",
            NetworkKind::Discriminator => "discriminator",
        }
    }
}

/// Re-initialises `params` in place: convolution weights ~ N(0, 0.02²),
/// convolution biases and norm offsets 0, norm scales 1. Samples are drawn in
/// `f64` so an `f32` and an `f64` network built from one seed agree.
pub fn init_weights<T: Real>(params: &mut ParamSet<T>, seed: u64, kind: NetworkKind) {
    let mut rng = rng::stream(seed, rng::label(kind.tag()));
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    for p in params.iter_mut() {
        let fill = if p.name.ends_with("conv.weight") {
            None
        } else if p.name.ends_with("norm.weight") {
            Some(T::one())
        } else {
            Some(T::zero())
        };
        match fill {
            Some(v) => p.data.iter_mut().for_each(|x| *x = v),
            None => p.data.iter_mut().for_each(|x| *x = T::lit(normal.sample(&mut rng))),
        }
    }
}
