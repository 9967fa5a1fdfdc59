use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use super::psf::Psf;
use crate::error::{Error, Result};
use crate::fft;
use crate::imagecore::{Degrader, Frame, ValueRange};
use crate::rng;

/// Numpy-style `reflect` index (edge sample not repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// 2-D convolution of a row-major `h × w` plane with an odd `k × k` kernel,
/// reflect-padded so the output keeps the input size. Computed with FFTs on
/// the padded plane; the kernel footprint never wraps inside the kept region.
pub fn convolve_reflect(src: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Result<Vec<f64>> {
    if k.is_multiple_of(2) || kernel.len() != k * k {
        return Err(Error::ShapeMismatch(format!("kernel must be an odd square, got {} taps", kernel.len())));
    }
    if k > h || k > w {
        return Err(Error::InvalidArgument(format!(
            "{k}x{k} kernel is larger than the {h}x{w} frame"
        )));
    }
    let r = k / 2;
    let (ph, pw) = (h + 2 * r, w + 2 * r);
    let mut img = vec![Complex64::default(); ph * pw];
    for y in 0..ph {
        let sy = reflect(y as isize - r as isize, h);
        for x in 0..pw {
            let sx = reflect(x as isize - r as isize, w);
            img[y * pw + x] = Complex64::new(src[sy * w + sx], 0.0);
        }
    }
    // kernel centre at the origin, negative offsets wrapped
    let mut ker = vec![Complex64::default(); ph * pw];
    for i in 0..k {
        let y = (i as isize - r as isize).rem_euclid(ph as isize) as usize;
        for j in 0..k {
            let x = (j as isize - r as isize).rem_euclid(pw as isize) as usize;
            ker[y * pw + x] = Complex64::new(kernel[i * k + j], 0.0);
        }
    }
    let forward = fft::Fft2::new(ph, pw, rustfft::FftDirection::Forward);
    forward.process(&mut img);
    forward.process(&mut ker);
    for (a, b) in img.iter_mut().zip(&ker) {
        *a *= b;
    }
    fft::inverse(&mut img, ph, pw);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(img[(y + r) * pw + x + r].re);
        }
    }
    Ok(out)
}

/// Blurs a normalized frame with `psf`, adds zero-mean Gaussian noise of
/// standard deviation `noise_sigma` drawn from `seed`, and clamps to `[-1, 1]`.
pub fn degrade(frame: &Frame, psf: &Psf, noise_sigma: f64, seed: u64) -> Result<Frame> {
    if frame.range() != ValueRange::Normalized {
        return Err(Error::ValueRange(format!(
            "degrade expects a normalized frame, got {:?}",
            frame.range()
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let (h, w) = frame.dims();
    let mut out = convolve_reflect(frame.pixels(), h, w, &psf.kernel, psf.size)?;
    if noise_sigma > 0.0 {
        let mut rng = rng::stream(seed, rng::label("degrade-noise"));
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for v in &mut out {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut out {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(Frame::new(h, w, out, ValueRange::Normalized)?.with_pitch_um(frame.pixel_pitch_um()))
}

/// [`Degrader`] backed by a PSF. 8-bit frames are normalized, degraded and
/// quantized back to 8 bits, like a detector readout.
#[derive(Clone, Debug)]
pub struct PsfDegrader {
    pub psf: Psf,
    pub noise_sigma: f64,
}

impl Degrader for PsfDegrader {
    fn degrade(&self, frame: &Frame, seed: u64) -> Result<Frame> {
        match frame.range() {
            ValueRange::Raw8Bit => {
                Ok(degrade(&frame.normalize(), &self.psf, self.noise_sigma, seed)?.denormalize())
            }
            _ => degrade(frame, &self.psf, self.noise_sigma, seed),
        }
    }
}
