#![allow(dead_code)]

pub mod e2e;

use lwir_hfe::imagecore::{load_frame, Frame, ValueRange};
use lwir_hfe::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> Frame {
    load_frame(&e2e::data_dir().join(format!("{name}.pgm"))).expect("fixture")
}

/// Top-left `h × w` window of a fixture, in the normalized range.
pub fn fixture_window(name: &str, h: usize, w: usize) -> Frame {
    let f = fixture(name);
    Frame::from_fn(h, w, ValueRange::Raw8Bit, |y, x| f.get(y, x)).unwrap().normalize()
}

pub fn random_frame(rng: &mut impl Rng, h: usize, w: usize) -> Frame {
    let px = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Frame::new(h, w, px, ValueRange::Normalized).unwrap()
}

pub fn random_tensor(rng: &mut impl Rng, n: usize, h: usize, w: usize) -> Tensor<f32> {
    Tensor::from_vec(n, 1, h, w, (0..n * h * w).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
}

pub fn random_tensor64(rng: &mut impl Rng, n: usize, h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_vec(n, 1, h, w, (0..n * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Normalized-domain batch cut from the fixtures: `lq` from a blurred copy
/// (3×3 box) so the two domains differ.
pub fn image_batch(n: usize, size: usize) -> (Tensor<f32>, Tensor<f32>) {
    let names = e2e::IMAGES;
    let mut lq = Vec::new();
    let mut hq = Vec::new();
    for i in 0..n {
        let f = fixture_window(names[i % names.len()], size, size);
        let px: Vec<f32> = f.pixels().iter().map(|&v| v as f32).collect();
        let blurred: Vec<f32> = (0..size * size)
            .map(|k| {
                let (y, x) = ((k / size) as isize, (k % size) as isize);
                let mut s = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let yy = (y + dy).clamp(0, size as isize - 1) as usize;
                        let xx = (x + dx).clamp(0, size as isize - 1) as usize;
                        s += px[yy * size + xx];
                    }
                }
                s / 9.0
            })
            .collect();
        hq.extend(px);
        lq.extend(blurred);
    }
    (
        Tensor::from_vec(n, 1, size, size, lq),
        Tensor::from_vec(n, 1, size, size, hq),
    )
}

pub fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}
