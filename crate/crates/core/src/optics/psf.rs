use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lens::{phase_profile, wrap_phase, LensSpec, PhaseMap, SamplingGrid};
use super::propagate::angular_spectrum;
use crate::error::{Error, Result};

/// Detector-side sampling of a PSF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocalPlane {
    pub pitch_m: f64,
    /// Odd side length of the centre crop kept as the blur kernel.
    pub kernel_size: usize,
}

impl Default for FocalPlane {
    fn default() -> Self {
        FocalPlane {
            pitch_m: 12e-6,
            kernel_size: 63,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub wavelength_m: f64,
    pub weight: f64,
}

/// Unit-sum blur kernel sampled on the detector grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Psf {
    pub kernel: Vec<f64>,
    pub size: usize,
    pub sample_pitch_m: f64,
    pub wavelengths: Vec<SpectralSample>,
    /// Fraction of the focal-plane energy that falls inside the kernel
    /// window before renormalisation.
    pub captured_energy: f64,
}

impl Psf {
    /// Kernel with a single unit tap at the centre.
    pub fn delta(size: usize) -> Psf {
        assert!(size % 2 == 1);
        let mut kernel = vec![0.0; size * size];
        kernel[size * size / 2] = 1.0;
        Psf {
            kernel,
            size,
            sample_pitch_m: FocalPlane::default().pitch_m,
            wavelengths: Vec::new(),
            captured_energy: 1.0,
        }
    }

    /// Unit-sum kernel from arbitrary nonnegative taps.
    pub fn from_kernel(kernel: Vec<f64>, size: usize, sample_pitch_m: f64) -> Result<Psf> {
        if size.is_multiple_of(2) || kernel.len() != size * size {
            return Err(Error::ShapeMismatch(format!(
                "kernel of {} taps is not an odd square of side {size}",
                kernel.len()
            )));
        }
        if kernel.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("kernel taps must be finite and nonnegative".into()));
        }
        let total: f64 = kernel.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("kernel has no energy".into()));
        }
        Ok(Psf {
            kernel: kernel.iter().map(|v| v / total).collect(),
            size,
            sample_pitch_m,
            wavelengths: Vec::new(),
            captured_energy: 1.0,
        })
    }

    pub fn peak(&self) -> f64 {
        self.kernel.iter().copied().fold(0.0, f64::max)
    }

    /// Σ k(r)·|r|² about the kernel centre, in pixels².
    pub fn second_moment(&self) -> f64 {
        let c = (self.size / 2) as f64;
        self.kernel
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (y, x) = ((i / self.size) as f64 - c, (i % self.size) as f64 - c);
                v * (x * x + y * y)
            })
            .sum()
    }

    pub fn sidecar(&self, lens: Option<LensSpec>) -> PsfSidecar {
        PsfSidecar {
            rows: self.size,
            cols: self.size,
            dtype: "f64le".into(),
            sample_pitch_m: self.sample_pitch_m,
            wavelengths: self.wavelengths.clone(),
            captured_energy: self.captured_energy,
            lens,
        }
    }

    /// Writes the kernel as raw little-endian f64 to `path` and the JSON
    /// sidecar next to it (`psf.bin` → `psf.json`). Returns the sidecar path.
    pub fn save(&self, path: &Path, lens: Option<LensSpec>) -> Result<PathBuf> {
        let bytes: Vec<u8> = self.kernel.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let side = path.with_extension("json");
        let text = serde_json::to_string_pretty(&self.sidecar(lens))?;
        fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
        Ok(side)
    }

    pub fn load(path: &Path) -> Result<Psf> {
        let side = path.with_extension("json");
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: PsfSidecar = serde_json::from_str(&text)?;
        if meta.dtype != "f64le" || meta.rows != meta.cols {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported PSF layout {} {}x{}",
                side.display(),
                meta.dtype,
                meta.rows,
                meta.cols
            )));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != meta.rows * meta.cols * 8 {
            return Err(Error::ShapeMismatch(format!(
                "{}: {} bytes for a {}x{} f64 kernel",
                path.display(),
                bytes.len(),
                meta.rows,
                meta.cols
            )));
        }
        let kernel = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Psf {
            kernel,
            size: meta.rows,
            sample_pitch_m: meta.sample_pitch_m,
            wavelengths: meta.wavelengths,
            captured_energy: meta.captured_energy,
        })
    }
}

/// JSON description stored next to an exported kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub sample_pitch_m: f64,
    pub wavelengths: Vec<SpectralSample>,
    pub captured_energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lens: Option<LensSpec>,
}

/// `count` equally weighted wavelengths spanning the lens band.
pub fn uniform_band_weights(spec: &LensSpec, count: usize) -> Vec<SpectralSample> {
    let (lo, hi) = spec.band_m;
    (0..count)
        .map(|i| SpectralSample {
            wavelength_m: if count > 1 {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            } else {
                spec.design_wavelength_m
            },
            weight: 1.0 / count as f64,
        })
        .collect()
}

/// Area-overlap weights mapping source samples (pitch `src`, sample `k` at
/// `(k - n/2)·src`) onto `size` detector pixels of pitch `dst` centred on
/// the axis. Entry `i` lists `(k, fraction of sample k inside pixel i)`.
fn overlap_weights(n: usize, src: f64, size: usize, dst: f64) -> Vec<Vec<(usize, f64)>> {
    let half = (size / 2) as f64;
    let centre = (n / 2) as f64;
    (0..size)
        .map(|i| {
            let lo = (i as f64 - half - 0.5) * dst;
            let hi = (i as f64 - half + 0.5) * dst;
            let k_lo = ((lo / src + centre - 0.5).floor().max(0.0)) as usize;
            let k_hi = ((hi / src + centre + 0.5).ceil().min((n - 1) as f64)) as usize;
            (k_lo..=k_hi)
                .filter_map(|k| {
                    let x = (k as f64 - centre) * src;
                    let overlap = (hi.min(x + src / 2.0) - lo.max(x - src / 2.0)).max(0.0);
                    (overlap > 0.0).then_some((k, overlap / src))
                })
                .collect()
        })
        .collect()
}

/// Monochromatic PSF of `phase` (the design phase, realised modulo 2π and
/// scaled by `λ_design / λ`) at the plane a focal length behind the lens.
pub fn psf_monochromatic(
    phase: &PhaseMap,
    spec: &LensSpec,
    lambda: f64,
    focal: FocalPlane,
) -> Result<Psf> {
    spec.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("wavelength must be positive, got {lambda}")));
    }
    if focal.kernel_size.is_multiple_of(2) || !(focal.pitch_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "focal plane needs an odd kernel size and positive pitch: {focal:?}"
        )));
    }
    let grid = phase.grid;
    let recommended = spec.recommended_pitch_m(lambda);
    if grid.pitch_m > 2.0 * recommended {
        return Err(Error::Undersampled {
            pitch_m: grid.pitch_m,
            recommended_m: recommended,
        });
    }
    if grid.pitch_m > recommended {
        log::warn!(
            "pupil pitch {:e} m is coarser than the recommended {:e} m at {:e} m",
            grid.pitch_m,
            recommended,
            lambda
        );
    }

    let scale = phase.wavelength_m / lambda;
    let mut field: Vec<Complex64> = phase
        .values
        .iter()
        .zip(&phase.transmits)
        .map(|(&phi, &open)| {
            if open {
                // the profile is a phase delay; with the exp(+ikz) propagator
                // that is exp(-iφ), which converges towards the focus
                Complex64::from_polar(1.0, -wrap_phase(phi) * scale)
            } else {
                Complex64::default()
            }
        })
        .collect();
    let n = grid.n;
    angular_spectrum(&mut field, n, grid.pitch_m, lambda, spec.focal_length_m);
    let intensity: Vec<f64> = field.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = intensity.iter().sum();

    let size = focal.kernel_size;
    let weights = overlap_weights(n, grid.pitch_m, size, focal.pitch_m);
    let (c_lo, c_hi) = weights
        .iter()
        .flatten()
        .fold((usize::MAX, 0), |(lo, hi), &(k, _)| (lo.min(k), hi.max(k)));
    // rows first: partial[i][c] = Σ_k a_ik I_kc for the columns in range
    let width = c_hi + 1 - c_lo;
    let mut partial = vec![0.0; size * width];
    for (i, row_w) in weights.iter().enumerate() {
        for &(k, a) in row_w {
            let src = &intensity[k * n + c_lo..k * n + c_hi + 1];
            for (dst, &v) in partial[i * width..(i + 1) * width].iter_mut().zip(src) {
                *dst += a * v;
            }
        }
    }
    let mut kernel = vec![0.0; size * size];
    for i in 0..size {
        for (j, col_w) in weights.iter().enumerate() {
            kernel[i * size + j] = col_w
                .iter()
                .map(|&(k, a)| a * partial[i * width + k - c_lo])
                .sum();
        }
    }
    let captured: f64 = kernel.iter().sum();
    if !(captured > 0.0) {
        return Err(Error::InvalidArgument(
            "no energy reaches the kernel window".into(),
        ));
    }
    for v in &mut kernel {
        *v /= captured;
    }
    Ok(Psf {
        kernel,
        size,
        sample_pitch_m: focal.pitch_m,
        wavelengths: vec![SpectralSample {
            wavelength_m: lambda,
            weight: 1.0,
        }],
        captured_energy: captured / total,
    })
}

/// Spectrally weighted PSF of the design lens. Wavelengths are summed in the
/// order given, so the result is reproducible bit for bit.
pub fn psf_polychromatic(
    spec: &LensSpec,
    grid: SamplingGrid,
    focal: FocalPlane,
    spectral_weights: &[SpectralSample],
) -> Result<Psf> {
    if spectral_weights.is_empty() {
        return Err(Error::InvalidArgument("empty spectral weight list".into()));
    }
    if spectral_weights
        .iter()
        .any(|s| !(s.weight >= 0.0 && s.weight.is_finite()))
    {
        return Err(Error::InvalidArgument("spectral weights must be nonnegative".into()));
    }
    let weight_sum: f64 = spectral_weights.iter().map(|s| s.weight).sum();
    if !(weight_sum > 0.0) {
        return Err(Error::InvalidArgument("all spectral weights are zero".into()));
    }
    let phase = phase_profile(spec, grid, spec.design_wavelength_m)?;
    let size = focal.kernel_size;
    let mut acc = vec![0.0; size * size];
    let mut captured = 0.0;
    for s in spectral_weights.iter().filter(|s| s.weight > 0.0) {
        let mono = psf_monochromatic(&phase, spec, s.wavelength_m, focal)?;
        for (a, k) in acc.iter_mut().zip(&mono.kernel) {
            *a += s.weight * k;
        }
        captured += s.weight * mono.captured_energy;
    }
    let total: f64 = acc.iter().sum();
    for v in &mut acc {
        *v /= total;
    }
    Ok(Psf {
        kernel: acc,
        size,
        sample_pitch_m: focal.pitch_m,
        wavelengths: spectral_weights.to_vec(),
        captured_energy: captured / weight_sum,
    })
}
