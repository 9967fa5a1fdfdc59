use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use super::{init_weights, NetworkKind};
use crate::error::{Error, Result};
use crate::imagecore::{Frame, ValueRange};
use crate::nn::{
    upsample_nearest2x, upsample_nearest2x_backward, Activation, BlockCache, Conv2d, ConvBlock,
    Grads, InstanceNorm, ParamSet, Real, Tensor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Channels after the stem; the downsampling stages double it twice.
    pub base_channels: usize,
    pub residual_blocks: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            base_channels: 64,
            residual_blocks: 9,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::InvalidArgument("generator base_channels must be > 0".into()));
        }
        Ok(())
    }
}

/// Resolution-preserving ResNet generator, single-channel in and out.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub config: GeneratorConfig,
    pub params: ParamSet<T>,
    stem: ConvBlock,
    down: [ConvBlock; 2],
    res: Vec<[ConvBlock; 2]>,
    up: [ConvBlock; 2],
    head: ConvBlock,
}

pub struct GeneratorCache<T> {
    stem: BlockCache<T>,
    down: Vec<BlockCache<T>>,
    res: Vec<[BlockCache<T>; 2]>,
    up: Vec<BlockCache<T>>,
    head: BlockCache<T>,
}

fn block<T: Real>(
    ps: &mut ParamSet<T>,
    name: &str,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    norm: bool,
    act: Activation,
) -> ConvBlock {
    let conv = Conv2d::new(ps, &format!("{name}.conv"), cin, cout, k, stride, k / 2);
    let norm = norm.then(|| InstanceNorm::new(ps, &format!("{name}.norm"), cout));
    ConvBlock { conv, norm, act }
}

impl<T: Real> Generator<T> {
    /// Builds the network with all parameters zero (norm scales 1).
    pub fn zeroed(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let b = config.base_channels;
        let mut ps = ParamSet::new();
        let relu = Activation::Relu;
        let stem = block(&mut ps, "stem", 1, b, 7, 1, true, relu);
        let down = [
            block(&mut ps, "down1", b, 2 * b, 3, 2, true, relu),
            block(&mut ps, "down2", 2 * b, 4 * b, 3, 2, true, relu),
        ];
        let res = (0..config.residual_blocks)
            .map(|i| {
                [
                    block(&mut ps, &format!("res{i}.a"), 4 * b, 4 * b, 3, 1, true, relu),
                    block(&mut ps, &format!("res{i}.b"), 4 * b, 4 * b, 3, 1, true, Activation::Identity),
                ]
            })
            .collect();
        let up = [
            block(&mut ps, "up1", 4 * b, 2 * b, 3, 1, true, relu),
            block(&mut ps, "up2", 2 * b, b, 3, 1, true, relu),
        ];
        let head = block(&mut ps, "head", b, 1, 7, 1, false, Activation::Tanh);
        // the norm scales start at one even in a "zeroed" network
        for p in ps.iter_mut() {
            if p.name.ends_with("norm.weight") {
                p.data.iter_mut().for_each(|v| *v = T::one());
            }
        }
        Ok(Generator {
            config,
            params: ps,
            stem,
            down,
            res,
            up,
            head,
        })
    }

    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        let mut g = Self::zeroed(config)?;
        init_weights(&mut g.params, seed, NetworkKind::Generator);
        Ok(g)
    }

    pub fn cast<U: Real>(&self) -> Generator<U> {
        Generator {
            config: self.config,
            params: self.params.cast(),
            stem: self.stem.clone(),
            down: self.down.clone(),
            res: self.res.clone(),
            up: self.up.clone(),
            head: self.head.clone(),
        }
    }

    /// Indices of the convolution parameters of residual block `i`.
    pub fn residual_conv_params(&self, i: usize) -> Vec<usize> {
        self.res[i]
            .iter()
            .flat_map(|b| [b.conv.weight, b.conv.bias])
            .collect()
    }

    fn check_input(x: &Tensor<T>) -> Result<()> {
        if x.c != 1 {
            return Err(Error::ShapeMismatch(format!("generator expects 1 channel, got {}", x.c)));
        }
        if !x.h.is_multiple_of(4) || !x.w.is_multiple_of(4) || x.h == 0 || x.w == 0 {
            return Err(Error::ShapeMismatch(format!(
                "generator input must be a nonzero multiple of 4 on each side, got {}x{}",
                x.h, x.w
            )));
        }
        Ok(())
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, GeneratorCache<T>)> {
        Self::check_input(x)?;
        let ps = &self.params;
        let (mut h, stem) = self.stem.forward(ps, x.clone());
        let mut down = Vec::with_capacity(2);
        for b in &self.down {
            let (y, c) = b.forward(ps, h);
            down.push(c);
            h = y;
        }
        let mut res = Vec::with_capacity(self.res.len());
        for [a, b] in &self.res {
            let skip = h.clone();
            let (t, ca) = a.forward(ps, h);
            let (mut y, cb) = b.forward(ps, t);
            y.add_assign(&skip);
            res.push([ca, cb]);
            h = y;
        }
        let mut up = Vec::with_capacity(2);
        for b in &self.up {
            let (y, c) = b.forward(ps, upsample_nearest2x(&h));
            up.push(c);
            h = y;
        }
        let (y, head) = self.head.forward(ps, h);
        Ok((
            y,
            GeneratorCache {
                stem,
                down,
                res,
                up,
                head,
            },
        ))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_train(x)?.0)
    }

    /// Back-propagates `gy` (the loss gradient at the output). Parameter
    /// gradients are accumulated into `grads` when given; the input gradient
    /// is returned when `need_input` is set.
    pub fn backward(
        &self,
        cache: &GeneratorCache<T>,
        gy: Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let ps = &self.params;
        let mut g = self
            .head
            .backward(ps, &cache.head, gy, grads.as_deref_mut(), true)
            .expect("input grad");
        for (b, c) in self.up.iter().zip(&cache.up).rev() {
            let gu = b.backward(ps, c, g, grads.as_deref_mut(), true).expect("input grad");
            g = upsample_nearest2x_backward(&gu);
        }
        for ([a, b], [ca, cb]) in self.res.iter().zip(&cache.res).rev() {
            let gt = b.backward(ps, cb, g.clone(), grads.as_deref_mut(), true).expect("input grad");
            let mut gx = a.backward(ps, ca, gt, grads.as_deref_mut(), true).expect("input grad");
            gx.add_assign(&g);
            g = gx;
        }
        for (b, c) in self.down.iter().zip(&cache.down).rev() {
            g = b.backward(ps, c, g, grads.as_deref_mut(), true).expect("input grad");
        }
        self.stem.backward(ps, &cache.stem, g, grads, need_input)
    }
}

impl Generator<f32> {
    /// Writes a standalone generator checkpoint.
    pub fn save(&self, path: &Path, seed: u64, step: u64, epoch: u64) -> Result<()> {
        let ckpt = Checkpoint::from_params(
            NetworkKind::Generator.tag(),
            serde_json::to_value(self.config)?,
            seed,
            step,
            epoch,
            "",
            &self.params,
        );
        write_checkpoint(path, &ckpt)
    }

    /// Runs the generator on one frame (8-bit or normalized) and returns the
    /// 8-bit result. Sides that are not multiples of 4 are reflect-padded at
    /// the bottom/right and cropped back afterwards.
    pub fn restore_frame(&self, frame: &Frame) -> Result<Frame> {
        let input = match frame.range() {
            ValueRange::Raw8Bit => frame.normalize(),
            ValueRange::Normalized => frame.clone(),
            ValueRange::Unbounded => {
                return Err(Error::ValueRange("restore expects an 8-bit or normalized frame".into()))
            }
        };
        let (h, w) = input.dims();
        let (ph, pw) = (h.div_ceil(4) * 4, w.div_ceil(4) * 4);
        let mirror = |i: usize, n: usize| if i < n { i } else { 2 * (n - 1) - i };
        if ph - h >= h || pw - w >= w {
            return Err(Error::ShapeMismatch(format!("frame {h}x{w} too small to pad")));
        }
        let mut data = Vec::with_capacity(ph * pw);
        for y in 0..ph {
            for x in 0..pw {
                data.push(input.get(mirror(y, h), mirror(x, w)) as f32);
            }
        }
        let out = self.forward(&Tensor::from_vec(1, 1, ph, pw, data))?;
        let mut px = Vec::with_capacity(h * w);
        for y in 0..h {
            px.extend(out.data[y * pw..y * pw + w].iter().map(|&v| f64::from(v)));
        }
        Ok(Frame::new(h, w, px, ValueRange::Normalized)?
            .with_pitch_um(frame.pixel_pitch_um())
            .denormalize())
    }

    /// Loads a generator from a standalone generator checkpoint or from the
    /// `G` network of a training-state checkpoint.
    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = read_checkpoint(path)?;
        let (config, prefix) = match ckpt.header.architecture.as_str() {
            "generator" => (ckpt.header.config.clone(), ""),
            "train_state" => (
                ckpt.header
                    .config
                    .get("generator")
                    .cloned()
                    .ok_or_else(|| Error::CorruptCheckpoint("train state lacks a generator config".into()))?,
                "G/",
            ),
            other => {
                return Err(Error::ArchitectureMismatch {
                    expected: "generator".into(),
                    found: other.into(),
                })
            }
        };
        let config: GeneratorConfig = serde_json::from_value(config)
            .map_err(|e| Error::CorruptCheckpoint(format!("generator config: {e}")))?;
        let mut g = Generator::zeroed(config)?;
        ckpt.fill_params(prefix, &mut g.params)?;
        Ok(g)
    }
}
