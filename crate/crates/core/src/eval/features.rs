use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imagecore::{Frame, ValueRange};
use crate::nn::{Activation, Conv2d, ConvBlock, ParamSet, Tensor};
use crate::rng;

/// Maps a frame to a fixed-length feature vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, frame: &Frame) -> Result<Vec<f64>>;
}

/// Frozen, randomly initialised convolutional embedder: four 3×3 stride-2
/// ReLU stages (32, 64, 128, 256 channels) followed by global average
/// pooling. He-scaled weights from a fixed seed keep it reproducible without
/// pretrained data; distances it yields are only comparable with each other.
pub struct RandomConvEmbedder {
    params: ParamSet<f32>,
    stages: Vec<ConvBlock>,
}

pub const EMBEDDER_WIDTHS: [usize; 4] = [32, 64, 128, 256];

impl RandomConvEmbedder {
    pub fn new(seed: u64) -> Self {
        let mut params = ParamSet::new();
        let mut stages = Vec::new();
        let mut cin = 1;
        for (i, &cout) in EMBEDDER_WIDTHS.iter().enumerate() {
            let conv = Conv2d::new(&mut params, &format!("embed{i}"), cin, cout, 3, 2, 1);
            stages.push(ConvBlock {
                conv,
                norm: None,
                act: Activation::Relu,
            });
            cin = cout;
        }
        let mut r = rng::stream(seed, rng::label("feature-embedder"));
        for (stage, cin) in stages.iter().zip([1usize, 32, 64, 128]) {
            let normal = Normal::new(0.0, (2.0 / (9.0 * cin as f64)).sqrt()).expect("valid std");
            for v in &mut params.param_mut(stage.conv.weight).data {
                *v = normal.sample(&mut r) as f32;
            }
        }
        RandomConvEmbedder { params, stages }
    }
}

impl Default for RandomConvEmbedder {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Embedder for RandomConvEmbedder {
    fn dim(&self) -> usize {
        EMBEDDER_WIDTHS[3]
    }

    fn embed(&self, frame: &Frame) -> Result<Vec<f64>> {
        let f = match frame.range() {
            ValueRange::Raw8Bit => frame.normalize(),
            _ => frame.clone(),
        };
        let (h, w) = f.dims();
        let mut x = Tensor::from_vec(1, 1, h, w, f.pixels().iter().map(|&v| v as f32).collect());
        for s in &self.stages {
            x = s.forward(&self.params, x).0;
        }
        let m = x.plane_len() as f64;
        Ok(x.data
            .chunks_exact(x.plane_len())
            .map(|p| p.iter().map(|&v| f64::from(v)).sum::<f64>() / m)
            .collect())
    }
}

fn moments(features: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples per set, got {n}")));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::ShapeMismatch("feature vectors must share a nonzero length".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let mut centered = x;
    for j in 0..d {
        let m = mean[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((mean, cov))
}

/// Eigenvalues at or below the numerical noise floor of the spectrum are
/// treated as exact zeros so rank-deficient covariances do not leak
/// `sqrt(rounding error)` into the trace.
fn clamped_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (m + m.transpose()) * 0.5;
    let mut e = SymmetricEigen::new(sym);
    let top = e.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let floor = top * e.eigenvalues.len() as f64 * f64::EPSILON;
    e.eigenvalues.iter_mut().for_each(|v| {
        if *v <= floor {
            *v = 0.0
        }
    });
    e
}

/// Fréchet distance between Gaussian fits (sample mean, `n-1` covariance)
/// of two feature sets.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (ma, ca) = moments(a)?;
    let (mb, cb) = moments(b)?;
    if ma.len() != mb.len() {
        return Err(Error::ShapeMismatch("feature sets differ in dimension".into()));
    }
    let ea = clamped_eigen(&ca);
    let sqrt_ca = &ea.eigenvectors
        * DMatrix::from_diagonal(&ea.eigenvalues.map(f64::sqrt))
        * ea.eigenvectors.transpose();
    // Tr((Ca Cb)^½) = Tr((Ca^½ Cb Ca^½)^½), and the latter is symmetric PSD.
    let inner = &sqrt_ca * &cb * &sqrt_ca;
    let tr_sqrt: f64 = clamped_eigen(&inner).eigenvalues.iter().map(|v| v.sqrt()).sum();
    let diff = (&ma - &mb).norm_squared();
    Ok((diff + ca.trace() + cb.trace() - 2.0 * tr_sqrt).max(0.0))
}

/// Fréchet distance between two frame sets under `embedder`.
pub fn feature_distance(set_a: &[Frame], set_b: &[Frame], embedder: &dyn Embedder) -> Result<f64> {
    if set_a.len() < 2 || set_b.len() < 2 {
        return Err(Error::InvalidArgument("each frame set needs at least 2 frames".into()));
    }
    let fa = set_a.iter().map(|f| embedder.embed(f)).collect::<Result<Vec<_>>>()?;
    let fb = set_b.iter().map(|f| embedder.embed(f)).collect::<Result<Vec<_>>>()?;
    frechet_distance(&fa, &fb)
}
