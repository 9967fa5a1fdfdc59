use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fft;

/// Free-space angular-spectrum propagation of an `n × n` field sampled at
/// `pitch_m` over distance `z_m`. Evanescent components are dropped, and so
/// are plane waves steeper than the band limit `1 / (λ √((2 z Δf)² + 1))`
/// per axis, whose transfer phase the grid undersamples; those would
/// otherwise wrap around the periodic window. Every kept plane wave only
/// picks up a phase, so the transfer is lossless for fields inside the band.
pub fn angular_spectrum(field: &mut [Complex64], n: usize, pitch_m: f64, lambda: f64, z_m: f64) {
    assert_eq!(field.len(), n * n);
    fft::forward(field, n, n);
    let inv_l2 = 1.0 / (lambda * lambda);
    let df = 1.0 / (n as f64 * pitch_m);
    let limit = band_limit(n, pitch_m, lambda, z_m);
    for r in 0..n {
        let fy = fft::signed_index(r, n) as f64 * df;
        for c in 0..n {
            let fx = fft::signed_index(c, n) as f64 * df;
            let kz2 = inv_l2 - fx * fx - fy * fy;
            let v = &mut field[r * n + c];
            if kz2 > 0.0 && fx.abs() <= limit && fy.abs() <= limit {
                *v *= Complex64::from_polar(1.0, 2.0 * PI * z_m * kz2.sqrt());
            } else {
                *v = Complex64::default();
            }
        }
    }
    fft::inverse(field, n, n);
}

/// Highest spatial frequency (cycles per metre) kept on each axis.
pub fn band_limit(n: usize, pitch_m: f64, lambda: f64, z_m: f64) -> f64 {
    let df = 1.0 / (n as f64 * pitch_m);
    1.0 / (lambda * ((2.0 * z_m.abs() * df).powi(2) + 1.0).sqrt())
}

/// Σ|U|², the discrete field energy up to the constant pixel area.
pub fn field_energy(field: &[Complex64]) -> f64 {
    field.iter().map(|v| v.norm_sqr()).sum()
}
