//! Single-level orthonormal 2-D Haar transform.
//!
//! Each non-overlapping 2×2 block `[[a, b], [c, d]]` maps to
//!
//! ```text
//! ll = (a + b + c + d) / 2     hl = (a - b + c - d) / 2
//! lh = (a + b - c - d) / 2     hh = (a - b - c + d) / 2
//! ```
//!
//! so `hl` carries horizontal pixel-pair differences and `lh` vertical ones.
//! The block matrix is symmetric and orthogonal, which makes the inverse the
//! same butterfly and the high-frequency projection self-adjoint.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::imagecore::{Frame, ValueRange};

/// The four sub-bands of one decomposition level, each `rows × cols`
/// (half the input size in each direction).
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletBands {
    rows: usize,
    cols: usize,
    ll: Vec<f64>,
    hl: Vec<f64>,
    lh: Vec<f64>,
    hh: Vec<f64>,
}

impl WaveletBands {
    pub fn new(
        rows: usize,
        cols: usize,
        ll: Vec<f64>,
        hl: Vec<f64>,
        lh: Vec<f64>,
        hh: Vec<f64>,
    ) -> Result<Self> {
        let n = rows * cols;
        for (name, band) in [("ll", &ll), ("hl", &hl), ("lh", &lh), ("hh", &hh)] {
            if band.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} band has {} coefficients, expected {rows}x{cols}",
                    band.len()
                )));
            }
        }
        if n == 0 {
            return Err(Error::ShapeMismatch("empty wavelet bands".into()));
        }
        Ok(WaveletBands { rows, cols, ll, hl, lh, hh })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        let z = vec![0.0; rows * cols];
        WaveletBands {
            rows,
            cols,
            ll: z.clone(),
            hl: z.clone(),
            lh: z.clone(),
            hh: z,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn ll(&self) -> &[f64] {
        &self.ll
    }

    pub fn hl(&self) -> &[f64] {
        &self.hl
    }

    pub fn lh(&self) -> &[f64] {
        &self.lh
    }

    pub fn hh(&self) -> &[f64] {
        &self.hh
    }

    pub fn ll_mut(&mut self) -> &mut [f64] {
        &mut self.ll
    }

    /// Copy with the approximation band replaced by zeros.
    pub fn without_ll(&self) -> Self {
        WaveletBands {
            ll: vec![0.0; self.ll.len()],
            ..self.clone()
        }
    }

    /// Copy keeping only the approximation band.
    pub fn only_ll(&self) -> Self {
        let z = vec![0.0; self.ll.len()];
        WaveletBands {
            hl: z.clone(),
            lh: z.clone(),
            hh: z,
            ..self.clone()
        }
    }

    pub fn energy(&self) -> f64 {
        [&self.ll, &self.hl, &self.lh, &self.hh]
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum()
    }
}

fn check_even(h: usize, w: usize) -> Result<()> {
    if !h.is_multiple_of(2) || !w.is_multiple_of(2) || h == 0 || w == 0 {
        return Err(Error::OddDimension { height: h, width: w });
    }
    Ok(())
}

/// Forward transform of a row-major `h × w` plane into `[ll, hl, lh, hh]`.
/// Caller guarantees even dimensions.
pub fn dwt2_plane<T: Float>(src: &[T], h: usize, w: usize) -> [Vec<T>; 4] {
    debug_assert!(h.is_multiple_of(2) && w.is_multiple_of(2) && src.len() == h * w);
    let (bh, bw) = (h / 2, w / 2);
    let half = T::from(0.5).unwrap();
    let mut out = [
        Vec::with_capacity(bh * bw),
        Vec::with_capacity(bh * bw),
        Vec::with_capacity(bh * bw),
        Vec::with_capacity(bh * bw),
    ];
    for i in 0..bh {
        let top = &src[2 * i * w..2 * i * w + w];
        let bot = &src[(2 * i + 1) * w..(2 * i + 1) * w + w];
        for j in 0..bw {
            let (a, b, c, d) = (top[2 * j], top[2 * j + 1], bot[2 * j], bot[2 * j + 1]);
            out[0].push((a + b + c + d) * half);
            out[1].push((a - b + c - d) * half);
            out[2].push((a + b - c - d) * half);
            out[3].push((a - b - c + d) * half);
        }
    }
    out
}

/// Inverse of [`dwt2_plane`] for `bh × bw` bands, writing a `2bh × 2bw` plane.
pub fn idwt2_plane<T: Float>(ll: &[T], hl: &[T], lh: &[T], hh: &[T], bh: usize, bw: usize) -> Vec<T> {
    let w = 2 * bw;
    let half = T::from(0.5).unwrap();
    let mut out = vec![T::zero(); 4 * bh * bw];
    for i in 0..bh {
        for j in 0..bw {
            let k = i * bw + j;
            let (s, x, y, z) = (ll[k], hl[k], lh[k], hh[k]);
            out[2 * i * w + 2 * j] = (s + x + y + z) * half;
            out[2 * i * w + 2 * j + 1] = (s - x + y - z) * half;
            out[(2 * i + 1) * w + 2 * j] = (s + x - y - z) * half;
            out[(2 * i + 1) * w + 2 * j + 1] = (s - x - y + z) * half;
        }
    }
    out
}

/// `idwt(ZERO, hl, lh, hh)` of a plane: the detail-only reconstruction.
/// The map is an orthogonal projection, so it is also its own adjoint.
pub fn high_frequency_plane<T: Float>(src: &[T], h: usize, w: usize) -> Vec<T> {
    let [ll, hl, lh, hh] = dwt2_plane(src, h, w);
    let zero = vec![T::zero(); ll.len()];
    idwt2_plane(&zero, &hl, &lh, &hh, h / 2, w / 2)
}

pub fn dwt2_haar(frame: &Frame) -> Result<WaveletBands> {
    let (h, w) = frame.dims();
    check_even(h, w)?;
    let [ll, hl, lh, hh] = dwt2_plane(frame.pixels(), h, w);
    WaveletBands::new(h / 2, w / 2, ll, hl, lh, hh)
}

/// Reconstructs a frame; the result carries [`ValueRange::Unbounded`] since
/// arbitrary band edits can leave any fixed range.
pub fn idwt2_haar(bands: &WaveletBands) -> Result<Frame> {
    let (bh, bw) = bands.dims();
    let px = idwt2_plane(&bands.ll, &bands.hl, &bands.lh, &bands.hh, bh, bw);
    Frame::new(2 * bh, 2 * bw, px, ValueRange::Unbounded)
}

/// Detail-only reconstruction: the frame minus its 2×2 block means.
pub fn extract_high_frequency(frame: &Frame) -> Result<Frame> {
    let (h, w) = frame.dims();
    check_even(h, w)?;
    let px = high_frequency_plane(frame.pixels(), h, w);
    Ok(Frame::new(h, w, px, ValueRange::Unbounded)?.with_pitch_um(frame.pixel_pitch_um()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(h: usize, w: usize, px: &[f64]) -> Frame {
        Frame::new(h, w, px.to_vec(), ValueRange::Unbounded).unwrap()
    }

    #[test]
    fn constant_block() {
        let b = dwt2_haar(&frame(2, 2, &[5.0; 4])).unwrap();
        assert_eq!(b.ll(), &[10.0]);
        assert_eq!((b.hl(), b.lh(), b.hh()), (&[0.0][..], &[0.0][..], &[0.0][..]));
    }

    #[test]
    fn single_impulse() {
        let b = dwt2_haar(&frame(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        for band in [b.ll(), b.hl(), b.lh(), b.hh()] {
            assert_eq!(band, &[0.5]);
        }
    }

    #[test]
    fn orientation_of_detail_bands() {
        // Horizontal step inside the block lands in hl, vertical in lh.
        let b = dwt2_haar(&frame(2, 2, &[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!((b.hl()[0], b.lh()[0], b.hh()[0]), (1.0, 0.0, 0.0));
        let b = dwt2_haar(&frame(2, 2, &[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!((b.hl()[0], b.lh()[0], b.hh()[0]), (0.0, 1.0, 0.0));
    }

    #[test]
    fn inverse_examples() {
        let z = idwt2_haar(&WaveletBands::zeros(3, 4)).unwrap();
        assert!(z.pixels().iter().all(|&v| v == 0.0));
        let b = WaveletBands::new(1, 1, vec![10.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(idwt2_haar(&b).unwrap().pixels(), &[5.0; 4]);
    }

    #[test]
    fn mismatched_bands_rejected() {
        assert!(WaveletBands::new(1, 2, vec![0.0; 2], vec![0.0; 2], vec![0.0; 1], vec![0.0; 2]).is_err());
    }

    #[test]
    fn odd_dimensions_rejected() {
        let f = Frame::filled(3, 4, 0.0, ValueRange::Unbounded).unwrap();
        assert!(matches!(dwt2_haar(&f), Err(Error::OddDimension { .. })));
        assert!(extract_high_frequency(&f).is_err());
    }

    #[test]
    fn high_frequency_examples() {
        let hf = extract_high_frequency(&frame(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(hf.pixels(), &[0.75, -0.25, -0.25, -0.25]);
        let c = extract_high_frequency(&frame(4, 6, &[3.25; 24])).unwrap();
        assert!(c.pixels().iter().all(|&v| v == 0.0));
    }

    fn plane(max: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1..=max, 1..=max).prop_flat_map(|(bh, bw)| {
            let (h, w) = (2 * bh, 2 * bw);
            (Just(h), Just(w), prop::collection::vec(-10.0f64..10.0, h * w))
        })
    }

    proptest! {
        #[test]
        fn linearity((h, w, x) in plane(6), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let y: Vec<f64> = (0..x.len()).map(|i| ((crate::rng::mix(seed, i as u64) % 2001) as f64 - 1000.0) / 100.0).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let bx = dwt2_plane(&x, h, w);
            let by = dwt2_plane(&y, h, w);
            let bm = dwt2_plane(&mix, h, w);
            for k in 0..4 {
                for i in 0..bm[k].len() {
                    prop_assert!((bm[k][i] - (a * bx[k][i] + b * by[k][i])).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn decomposition_identity((h, w, x) in plane(6)) {
            let f = frame(h, w, &x);
            let bands = dwt2_haar(&f).unwrap();
            let hf = extract_high_frequency(&f).unwrap();
            let lf = idwt2_haar(&bands.only_ll()).unwrap();
            for i in 0..x.len() {
                prop_assert!((hf.pixels()[i] + lf.pixels()[i] - x[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn high_frequency_blocks_have_zero_mean((h, w, x) in plane(6)) {
            let hf = high_frequency_plane(&x, h, w);
            for i in (0..h).step_by(2) {
                for j in (0..w).step_by(2) {
                    let s = hf[i * w + j] + hf[i * w + j + 1] + hf[(i + 1) * w + j] + hf[(i + 1) * w + j + 1];
                    prop_assert!(s.abs() < 1e-12);
                }
            }
        }
    }
}
