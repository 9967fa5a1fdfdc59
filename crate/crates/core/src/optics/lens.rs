use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical description of the singlet metalens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensSpec {
    pub focal_length_m: f64,
    pub diameter_m: f64,
    pub design_wavelength_m: f64,
    /// Inclusive sensor band `(min, max)`.
    pub band_m: (f64, f64),
}

impl Default for LensSpec {
    fn default() -> Self {
        LensSpec {
            focal_length_m: 7e-3,
            diameter_m: 7e-3,
            design_wavelength_m: 9.5e-6,
            band_m: (8e-6, 14e-6),
        }
    }
}

impl LensSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.focal_length_m,
            self.diameter_m,
            self.design_wavelength_m,
            self.band_m.0,
            self.band_m.1,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "lens parameters must be strictly positive: {self:?}"
            )));
        }
        if self.band_m.0 > self.band_m.1
            || self.design_wavelength_m < self.band_m.0
            || self.design_wavelength_m > self.band_m.1
        {
            return Err(Error::InvalidArgument(format!(
                "design wavelength {:e} m outside band [{:e}, {:e}] m",
                self.design_wavelength_m, self.band_m.0, self.band_m.1
            )));
        }
        Ok(())
    }

    /// Largest pupil sample pitch that resolves the marginal-ray phase
    /// gradient at wavelength `lambda`: `λ f / D`.
    pub fn recommended_pitch_m(&self, lambda: f64) -> f64 {
        lambda * self.focal_length_m / self.diameter_m
    }
}

/// Square pupil grid: `n × n` samples at `pitch_m`. Sample `i` sits at
/// `(i - n/2) * pitch`, so index `n/2` is the optical axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingGrid {
    pub n: usize,
    pub pitch_m: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        SamplingGrid {
            n: 1024,
            pitch_m: 8e-6,
        }
    }
}

impl SamplingGrid {
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch_m
    }

    pub fn extent_m(&self) -> f64 {
        self.n as f64 * self.pitch_m
    }
}

/// Hyperbolic focusing phase `(2π/λ)(√(x² + y² + f²) − f)`, unwrapped.
pub fn phase_at(focal_length_m: f64, x: f64, y: f64, lambda: f64) -> f64 {
    let f = focal_length_m;
    let r2 = x * x + y * y;
    // √(r² + f²) − f written without cancellation
    let path = r2 / ((r2 + f * f).sqrt() + f);
    2.0 * PI / lambda * path
}

pub fn wrap_phase(phi: f64) -> f64 {
    phi.rem_euclid(2.0 * PI)
}

/// Sampled lens phase. Samples outside the clear aperture are opaque.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    pub values: Vec<f64>,
    pub transmits: Vec<bool>,
    pub grid: SamplingGrid,
    pub wavelength_m: f64,
}

impl PhaseMap {
    pub fn sample_pitch_m(&self) -> f64 {
        self.grid.pitch_m
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.n + col]
    }

    /// The same aperture with a flat (zero) phase.
    pub fn zeroed(&self) -> PhaseMap {
        PhaseMap {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    /// Phase reduced modulo 2π, as realised by the nanopillars.
    pub fn wrapped(&self) -> PhaseMap {
        PhaseMap {
            values: self.values.iter().map(|&v| wrap_phase(v)).collect(),
            ..self.clone()
        }
    }
}

pub fn phase_profile(spec: &LensSpec, grid: SamplingGrid, lambda: f64) -> Result<PhaseMap> {
    spec.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("wavelength must be positive, got {lambda}")));
    }
    if grid.n < 2 || grid.extent_m() < spec.diameter_m {
        return Err(Error::InvalidArgument(format!(
            "grid {} x {:e} m = {:e} m is smaller than the {:e} m aperture",
            grid.n,
            grid.pitch_m,
            grid.extent_m(),
            spec.diameter_m
        )));
    }
    let n = grid.n;
    let radius2 = (spec.diameter_m / 2.0).powi(2);
    let mut values = Vec::with_capacity(n * n);
    let mut transmits = Vec::with_capacity(n * n);
    for r in 0..n {
        let y = grid.coord(r);
        for c in 0..n {
            let x = grid.coord(c);
            values.push(phase_at(spec.focal_length_m, x, y, lambda));
            transmits.push(x * x + y * y <= radius2);
        }
    }
    Ok(PhaseMap {
        values,
        transmits,
        grid,
        wavelength_m: lambda,
    })
}
