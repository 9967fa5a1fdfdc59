//! Row/column 2-D FFTs over row-major complex buffers.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fft: planner.plan_fft(cols, direction),
            col_fft: planner.plan_fft(rows, direction),
        }
    }

    /// Unnormalised in-place transform.
    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.rows * self.cols);
        self.row_fft.process(data);
        let mut column = vec![Complex64::default(); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = data[r * self.cols + c];
            }
            self.col_fft.process(&mut column);
            for r in 0..self.rows {
                data[r * self.cols + c] = column[r];
            }
        }
    }
}

pub fn forward(data: &mut [Complex64], rows: usize, cols: usize) {
    Fft2::new(rows, cols, FftDirection::Forward).process(data);
}

/// Inverse transform including the `1 / (rows * cols)` factor.
pub fn inverse(data: &mut [Complex64], rows: usize, cols: usize) {
    Fft2::new(rows, cols, FftDirection::Inverse).process(data);
    let scale = 1.0 / (rows * cols) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency index of DFT bin `k` out of `n`.
pub fn signed_index(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}
