//! Gradient passes shared by the training state and the gradient checks.
//!
//! Batches are processed one sample at a time; each sample contributes
//! `1/B` of every loss, so the result equals a batch-mean objective while
//! peak memory stays at one sample's activations.

use serde::Serialize;

use super::losses::{
    discriminator_adversarial_terms, generator_adversarial_term, mean_abs_diff, mean_abs_grad, LossWeights,
};
use crate::error::{Error, Result};
use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::nn::{Grads, Real, Tensor};
use crate::rng;
use crate::wavelet::high_frequency_plane;

/// Detail-only (zero-LL) reconstruction of every plane of a tensor. The map
/// is self-adjoint, so the same call back-propagates through it.
pub fn high_frequency_tensor<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = Vec::with_capacity(x.data.len());
    for plane in x.data.chunks_exact(x.plane_len()) {
        out.extend(high_frequency_plane(plane, x.h, x.w));
    }
    Tensor::from_vec(x.n, x.c, x.h, x.w, out)
}

/// Seed of one named network derived from the run seed.
pub fn network_seed(seed: u64, name: &str) -> u64 {
    rng::mix(seed, rng::label(name))
}

/// The five networks: `g` maps LQ→HQ, `f` maps HQ→LQ, `d_x` judges the LQ
/// domain, `d_y` the HQ domain and `d_hf` the high-frequency part of HQ frames.
#[derive(Clone, Debug)]
pub struct Networks<T> {
    pub g: Generator<T>,
    pub f: Generator<T>,
    pub d_x: Discriminator<T>,
    pub d_y: Discriminator<T>,
    pub d_hf: Option<Discriminator<T>>,
}

impl<T: Real> Networks<T> {
    pub fn new(gen: GeneratorConfig, disc: DiscriminatorConfig, with_hf: bool, seed: u64) -> Result<Self> {
        Ok(Networks {
            g: Generator::new(gen, network_seed(seed, "G"))?,
            f: Generator::new(gen, network_seed(seed, "F"))?,
            d_x: Discriminator::new(disc, network_seed(seed, "D_X"))?,
            d_y: Discriminator::new(disc, network_seed(seed, "D_Y"))?,
            d_hf: if with_hf {
                Some(Discriminator::new(disc, network_seed(seed, "D_HF"))?)
            } else {
                None
            },
        })
    }

    pub fn cast<U: Real>(&self) -> Networks<U> {
        Networks {
            g: self.g.cast(),
            f: self.f.cast(),
            d_x: self.d_x.cast(),
            d_y: self.d_y.cast(),
            d_hf: self.d_hf.as_ref().map(Discriminator::cast),
        }
    }
}

/// Loss components of one step. `*_generator` entries are the generator-side
/// values that enter the weighted total; `*_discriminator` entries are what
/// the discriminators minimise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepLosses {
    pub hf_generator: Option<f64>,
    pub hf_discriminator: Option<f64>,
    pub full_generator_x: f64,
    pub full_generator_y: f64,
    pub full_discriminator_x: f64,
    pub full_discriminator_y: f64,
    pub cycle: f64,
    pub total: f64,
}

impl StepLosses {
    pub fn full_generator(&self) -> f64 {
        self.full_generator_x + self.full_generator_y
    }

    pub fn full_discriminator(&self) -> f64 {
        self.full_discriminator_x + self.full_discriminator_y
    }

    pub fn all_finite(&self) -> bool {
        [
            self.hf_generator.unwrap_or(0.0),
            self.hf_discriminator.unwrap_or(0.0),
            self.full_generator_x,
            self.full_generator_y,
            self.full_discriminator_x,
            self.full_discriminator_y,
            self.cycle,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Output of the generator pass: loss values, parameter gradients for `g`
/// and `f`, and the generated frames (per sample) that the discriminator
/// passes consume as detached inputs.
pub struct GeneratorPass<T> {
    pub hf: Option<f64>,
    pub full_x: f64,
    pub full_y: f64,
    pub cycle: f64,
    pub total: f64,
    pub grads_g: Grads<T>,
    pub grads_f: Grads<T>,
    pub fake_hq: Vec<Tensor<T>>,
    pub fake_lq: Vec<Tensor<T>>,
    /// High-frequency frames fed to `d_hf` in this pass, when it ran.
    pub fake_hf: Vec<Tensor<T>>,
}

fn check_batch<T: Real>(lq: &Tensor<T>, hq: &Tensor<T>) -> Result<()> {
    if lq.shape() != hq.shape() || lq.n == 0 {
        return Err(Error::ShapeMismatch(format!(
            "LQ batch {:?} and HQ batch {:?} must match and be non-empty",
            lq.shape(),
            hq.shape()
        )));
    }
    Ok(())
}

/// Whether the high-frequency term enters the generator objective.
pub fn uses_hf_term<T>(nets: &Networks<T>, w: &LossWeights) -> bool {
    w.hf_adversarial > 0.0 && nets.d_hf.is_some()
}

/// Forward and backward of the weighted generator objective with every
/// discriminator held fixed (their parameter gradients are never formed).
pub fn generator_pass<T: Real>(
    nets: &Networks<T>,
    lq: &Tensor<T>,
    hq: &Tensor<T>,
    w: &LossWeights,
) -> Result<GeneratorPass<T>> {
    check_batch(lq, hq)?;
    let use_hf = uses_hf_term(nets, w);
    let s = 1.0 / lq.n as f64;
    let mut out = GeneratorPass {
        hf: use_hf.then_some(0.0),
        full_x: 0.0,
        full_y: 0.0,
        cycle: 0.0,
        total: 0.0,
        grads_g: nets.g.params.zero_grads(),
        grads_f: nets.f.params.zero_grads(),
        fake_hq: Vec::with_capacity(lq.n),
        fake_lq: Vec::with_capacity(lq.n),
        fake_hf: Vec::new(),
    };
    for i in 0..lq.n {
        let (lq_i, hq_i) = (lq.item(i), hq.item(i));
        let (fake_hq, cg1) = nets.g.forward_train(&lq_i)?;
        let (rec_lq, cf2) = nets.f.forward_train(&fake_hq)?;
        let (fake_lq, cf1) = nets.f.forward_train(&hq_i)?;
        let (rec_hq, cg2) = nets.g.forward_train(&fake_lq)?;
        let (zy, cdy) = nets.d_y.forward_train(&fake_hq)?;
        let (zx, cdx) = nets.d_x.forward_train(&fake_lq)?;
        let (ly, gzy) = generator_adversarial_term(&zy.logits, w.full_adversarial * s);
        let (lx, gzx) = generator_adversarial_term(&zx.logits, w.full_adversarial * s);
        let cyc = mean_abs_diff(&lq_i, &rec_lq)? + mean_abs_diff(&hq_i, &rec_hq)?;

        let mut g_fake_hq = nets.d_y.backward(&cdy, gzy, None, true).expect("input grad");
        let mut g_fake_lq = nets.d_x.backward(&cdx, gzx, None, true).expect("input grad");
        if use_hf {
            let d_hf = nets.d_hf.as_ref().expect("checked above");
            let fake_hf = high_frequency_tensor(&fake_hq);
            let (zh, cdh) = d_hf.forward_train(&fake_hf)?;
            let (lh, gzh) = generator_adversarial_term(&zh.logits, w.hf_adversarial * s);
            let g_hf = d_hf.backward(&cdh, gzh, None, true).expect("input grad");
            g_fake_hq.add_assign(&high_frequency_tensor(&g_hf));
            *out.hf.as_mut().expect("set when use_hf") += lh * s;
            out.fake_hf.push(fake_hf);
        }
        let g_rec_lq = mean_abs_grad(&rec_lq, &lq_i, w.cycle * s);
        let g = nets.f.backward(&cf2, g_rec_lq, Some(&mut out.grads_f), true);
        g_fake_hq.add_assign(&g.expect("input grad"));
        let g_rec_hq = mean_abs_grad(&rec_hq, &hq_i, w.cycle * s);
        let g = nets.g.backward(&cg2, g_rec_hq, Some(&mut out.grads_g), true);
        g_fake_lq.add_assign(&g.expect("input grad"));
        nets.g.backward(&cg1, g_fake_hq, Some(&mut out.grads_g), false);
        nets.f.backward(&cf1, g_fake_lq, Some(&mut out.grads_f), false);

        out.full_x += lx * s;
        out.full_y += ly * s;
        out.cycle += cyc * s;
        out.fake_hq.push(fake_hq);
        out.fake_lq.push(fake_lq);
    }
    out.total = w.hf_adversarial * out.hf.unwrap_or(0.0) + w.full_adversarial * (out.full_x + out.full_y) + w.cycle * out.cycle;
    Ok(out)
}

/// One discriminator's loss and gradient over real/fake pairs.
fn discriminator_pass<T: Real>(
    d: &Discriminator<T>,
    real: &[Tensor<T>],
    fake: &[Tensor<T>],
) -> Result<(f64, Grads<T>)> {
    let s = 1.0 / real.len() as f64;
    let mut grads = d.params.zero_grads();
    let mut loss = 0.0;
    for (r, f) in real.iter().zip(fake) {
        let (zr, cr) = d.forward_train(r)?;
        let (zf, cf) = d.forward_train(f)?;
        let (l, gr, gf) = discriminator_adversarial_terms(&zr.logits, &zf.logits, s)?;
        d.backward(&cr, gr, Some(&mut grads), false);
        d.backward(&cf, gf, Some(&mut grads), false);
        loss += l * s;
    }
    Ok((loss, grads))
}

fn split<T: Real>(x: &Tensor<T>) -> Vec<Tensor<T>> {
    (0..x.n).map(|i| x.item(i)).collect()
}

pub struct FullDiscriminatorPass<T> {
    pub loss_x: f64,
    pub loss_y: f64,
    pub grads_x: Grads<T>,
    pub grads_y: Grads<T>,
}

/// Losses and gradients of `d_x` (real LQ vs generated LQ) and `d_y` (real HQ
/// vs generated HQ) on detached generated frames.
pub fn full_discriminator_pass<T: Real>(
    nets: &Networks<T>,
    lq: &Tensor<T>,
    hq: &Tensor<T>,
    fake_lq: &[Tensor<T>],
    fake_hq: &[Tensor<T>],
) -> Result<FullDiscriminatorPass<T>> {
    check_batch(lq, hq)?;
    if fake_lq.len() != lq.n || fake_hq.len() != hq.n {
        return Err(Error::ShapeMismatch("generated frames do not match the batch".into()));
    }
    let (loss_y, grads_y) = discriminator_pass(&nets.d_y, &split(hq), fake_hq)?;
    let (loss_x, grads_x) = discriminator_pass(&nets.d_x, &split(lq), fake_lq)?;
    Ok(FullDiscriminatorPass {
        loss_x,
        loss_y,
        grads_x,
        grads_y,
    })
}

/// Loss and gradient of `d_hf` on the high-frequency parts of real HQ frames
/// against those of the detached generated HQ frames. Returns the fake
/// inputs it judged alongside.
pub fn hf_discriminator_pass<T: Real>(
    d_hf: &Discriminator<T>,
    hq: &Tensor<T>,
    fake_hq: &[Tensor<T>],
) -> Result<(f64, Grads<T>, Vec<Tensor<T>>)> {
    if fake_hq.len() != hq.n {
        return Err(Error::ShapeMismatch("generated frames do not match the batch".into()));
    }
    let real: Vec<_> = split(hq).iter().map(high_frequency_tensor).collect();
    let fake: Vec<_> = fake_hq.iter().map(high_frequency_tensor).collect();
    let (loss, grads) = discriminator_pass(d_hf, &real, &fake)?;
    Ok((loss, grads, fake))
}
