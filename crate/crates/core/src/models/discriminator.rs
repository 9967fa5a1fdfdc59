use serde::{Deserialize, Serialize};

use super::{init_weights, NetworkKind};
use crate::error::{Error, Result};
use crate::nn::{Activation, BlockCache, Conv2d, ConvBlock, Grads, InstanceNorm, ParamSet, Real, Tensor};

pub const LEAKY_SLOPE: f64 = 0.2;

/// (kernel, stride) of the five convolutions; every layer pads by one.
const SCHEDULE: [(usize, usize); 5] = [(4, 2), (4, 2), (4, 2), (4, 1), (4, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Width of the first layer; the next three double it each time.
    pub base_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { base_channels: 64 }
    }
}

/// Receptive field of one output logit in input pixels.
pub fn receptive_field() -> usize {
    let (mut rf, mut jump) = (1, 1);
    for (k, s) in SCHEDULE {
        rf += (k - 1) * jump;
        jump *= s;
    }
    rf
}

/// Patch scores before the sigmoid, one grid per batch item.
#[derive(Clone, Debug)]
pub struct PatchGrid<T> {
    pub logits: Tensor<T>,
    pub receptive_field_px: usize,
}

impl<T: Real> PatchGrid<T> {
    pub fn rows(&self) -> usize {
        self.logits.h
    }

    pub fn cols(&self) -> usize {
        self.logits.w
    }

    pub fn probabilities(&self) -> Tensor<T> {
        self.logits.map(|v| T::one() / (T::one() + (-v).exp()))
    }
}

/// Five-layer PatchGAN discriminator.
#[derive(Clone, Debug)]
pub struct Discriminator<T> {
    pub config: DiscriminatorConfig,
    pub params: ParamSet<T>,
    layers: Vec<ConvBlock>,
}

pub struct DiscriminatorCache<T> {
    layers: Vec<BlockCache<T>>,
}

impl<T: Real> Discriminator<T> {
    pub fn zeroed(config: DiscriminatorConfig) -> Result<Self> {
        let b = config.base_channels;
        if b == 0 {
            return Err(Error::InvalidArgument("discriminator base_channels must be > 0".into()));
        }
        let widths = [1, b, 2 * b, 4 * b, 8 * b, 1];
        let mut ps = ParamSet::new();
        let mut layers = Vec::with_capacity(5);
        for (i, &(k, s)) in SCHEDULE.iter().enumerate() {
            let name = format!("layer{}", i + 1);
            let conv = Conv2d::new(&mut ps, &format!("{name}.conv"), widths[i], widths[i + 1], k, s, 1);
            let norm = (1..=3)
                .contains(&i)
                .then(|| InstanceNorm::new(&mut ps, &format!("{name}.norm"), widths[i + 1]));
            let act = if i < 4 {
                Activation::LeakyRelu(LEAKY_SLOPE)
            } else {
                Activation::Identity
            };
            layers.push(ConvBlock { conv, norm, act });
        }
        for p in ps.iter_mut() {
            if p.name.ends_with("norm.weight") {
                p.data.iter_mut().for_each(|v| *v = T::one());
            }
        }
        Ok(Discriminator {
            config,
            params: ps,
            layers,
        })
    }

    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        let mut d = Self::zeroed(config)?;
        init_weights(&mut d.params, seed, NetworkKind::Discriminator);
        Ok(d)
    }

    pub fn cast<U: Real>(&self) -> Discriminator<U> {
        Discriminator {
            config: self.config,
            params: self.params.cast(),
            layers: self.layers.clone(),
        }
    }

    /// Logit grid size for an `h × w` input.
    pub fn output_size(h: usize, w: usize) -> (usize, usize) {
        SCHEDULE
            .iter()
            .fold((h, w), |(h, w), &(k, s)| ((h + 2 - k) / s + 1, (w + 2 - k) / s + 1))
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(PatchGrid<T>, DiscriminatorCache<T>)> {
        let rf = receptive_field();
        if x.c != 1 {
            return Err(Error::ShapeMismatch(format!("discriminator expects 1 channel, got {}", x.c)));
        }
        if x.h < rf || x.w < rf {
            return Err(Error::ShapeMismatch(format!(
                "discriminator input {}x{} is smaller than its {rf}x{rf} receptive field",
                x.h, x.w
            )));
        }
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(&self.params, h);
            caches.push(c);
            h = y;
        }
        Ok((
            PatchGrid {
                logits: h,
                receptive_field_px: rf,
            },
            DiscriminatorCache { layers: caches },
        ))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<PatchGrid<T>> {
        Ok(self.forward_train(x)?.0)
    }

    /// Back-propagates the loss gradient with respect to the logits.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache<T>,
        g_logits: Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let mut g = g_logits;
        for (i, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let need = i > 0 || need_input;
            {
                let gx = layer.backward(&self.params, c, g, grads.as_deref_mut(), need)?;
                g = gx
            }
        }
        Some(g)
    }
}
