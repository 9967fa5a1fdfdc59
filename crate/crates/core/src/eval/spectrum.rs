use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::imagecore::Frame;

/// Detector pitch in millimetres.
pub const DEFAULT_PITCH_MM: f64 = 0.012;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Spatial frequency in cycles per millimetre.
    pub frequency_per_mm: f64,
    pub magnitude: f64,
}

/// Radially averaged DFT magnitude, averaged over frames.
///
/// Each frame's spectrum is `|DFT| / (H·W)`. Every frequency sample is
/// assigned to the nearest integer radius in cycles per frame, measured
/// against `N = min(H, W)`, so bin `k` sits at `k / (N · pitch)`. Bins beyond
/// Nyquist (`k > N/2`) are dropped.
pub fn spectrum_profile(frames: &[Frame], pixel_pitch_mm: f64) -> Result<Vec<SpectrumPoint>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("spectrum of an empty frame list".into()))?;
    if !(pixel_pitch_mm > 0.0 && pixel_pitch_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!("pixel pitch must be > 0, got {pixel_pitch_mm}")));
    }
    let (h, w) = first.dims();
    let n = h.min(w);
    let bins = n / 2 + 1;
    let mut bin_of = vec![usize::MAX; h * w];
    let mut counts = vec![0usize; bins];
    for ky in 0..h {
        let fy = fft::signed_index(ky, h) as f64 / h as f64;
        for kx in 0..w {
            let fx = fft::signed_index(kx, w) as f64 / w as f64;
            let k = ((fy * fy + fx * fx).sqrt() * n as f64).round() as usize;
            if k < bins {
                bin_of[ky * w + kx] = k;
                counts[k] += 1;
            }
        }
    }
    let plan = fft::Fft2::new(h, w, rustfft::FftDirection::Forward);
    let mut acc = vec![0.0; bins];
    for f in frames {
        if f.dims() != (h, w) {
            return Err(Error::dims((h, w), f.dims()));
        }
        let mut buf: Vec<Complex64> = f.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.process(&mut buf);
        let mut sums = vec![0.0; bins];
        for (c, &b) in buf.iter().zip(&bin_of) {
            if b != usize::MAX {
                sums[b] += c.norm();
            }
        }
        for k in 0..bins {
            acc[k] += sums[k] / (counts[k] as f64 * (h * w) as f64);
        }
    }
    let scale = 1.0 / (n as f64 * pixel_pitch_mm);
    Ok((0..bins)
        .map(|k| SpectrumPoint {
            frequency_per_mm: k as f64 * scale,
            magnitude: acc[k] / frames.len() as f64,
        })
        .collect())
}

/// Sum of profile magnitudes strictly above `cutoff_per_mm`.
pub fn energy_above(profile: &[SpectrumPoint], cutoff_per_mm: f64) -> f64 {
    profile
        .iter()
        .filter(|p| p.frequency_per_mm > cutoff_per_mm)
        .map(|p| p.magnitude)
        .sum()
}

/// Two-column CSV with a header row.
pub fn write_spectrum_csv(profile: &[SpectrumPoint], path: &Path) -> Result<()> {
    let mut s = String::from("frequency_per_mm,magnitude\n");
    for p in profile {
        s.push_str(&format!("{},{}\n", p.frequency_per_mm, p.magnitude));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
