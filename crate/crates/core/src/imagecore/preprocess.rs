use super::frame::{Frame, ValueRange};
use crate::error::{Error, Result};

/// Square side frames are resized to before cropping.
pub const TRAINING_SIZE: usize = 256;

/// Counter-clockwise rotation by a multiple of 90°.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn from_quarter_turns(k: usize) -> Self {
        Self::ALL[k % 4]
    }

    pub fn quarter_turns(self) -> usize {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }

    /// Applies the rotation to a row-major plane, returning the new plane and
    /// its `(height, width)`.
    pub fn apply<T: Copy>(self, src: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
        match self {
            Rotation::R0 => (src.to_vec(), h, w),
            Rotation::R180 => (src.iter().rev().copied().collect(), h, w),
            Rotation::R90 => {
                // out(i, j) = in(j, w - 1 - i), out is w x h
                let mut out = Vec::with_capacity(h * w);
                for i in 0..w {
                    for j in 0..h {
                        out.push(src[j * w + (w - 1 - i)]);
                    }
                }
                (out, w, h)
            }
            Rotation::R270 => {
                // out(i, j) = in(h - 1 - j, i)
                let mut out = Vec::with_capacity(h * w);
                for i in 0..w {
                    for j in 0..h {
                        out.push(src[(h - 1 - j) * w + i]);
                    }
                }
                (out, w, h)
            }
        }
    }
}

/// Bilinear resize with corner-aligned sampling: output corners land exactly
/// on input corners.
pub fn resize_bilinear(frame: &Frame, out_h: usize, out_w: usize) -> Result<Frame> {
    let (in_h, in_w) = frame.dims();
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(frame.clone());
    }
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(in_h, out_h), scale(in_w, out_w));
    let src = frame.pixels();
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let fy = y as f64 * sy;
        let y0 = (fy.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let ty = fy - y0 as f64;
        for x in 0..out_w {
            let fx = x as f64 * sx;
            let x0 = (fx.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let tx = fx - x0 as f64;
            let top = src[y0 * in_w + x0] * (1.0 - tx) + src[y0 * in_w + x1] * tx;
            let bottom = src[y1 * in_w + x0] * (1.0 - tx) + src[y1 * in_w + x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    let (lo, hi) = frame.range().bounds();
    for v in &mut out {
        *v = v.clamp(lo, hi);
    }
    Ok(Frame::new(out_h, out_w, out, frame.range())?.with_pitch_um(frame.pixel_pitch_um()))
}

/// Training-time preprocessing of an 8-bit frame: resize to 256×256, crop
/// `crop_size = (h, w)` at `crop_origin = (row, col)`, rotate, and map to
/// `[-1, 1]`. Randomness lives with the caller, which picks origin and
/// rotation from its own seeded stream.
pub fn preprocess(
    frame: &Frame,
    crop_size: (usize, usize),
    rotation: Rotation,
    crop_origin: (usize, usize),
) -> Result<Frame> {
    if frame.range() != ValueRange::Raw8Bit {
        return Err(Error::ValueRange(format!(
            "preprocess expects raw 8-bit input, got {:?}",
            frame.range()
        )));
    }
    let (ch, cw) = crop_size;
    let (oy, ox) = crop_origin;
    if ch < 2 || cw < 2 || oy + ch > TRAINING_SIZE || ox + cw > TRAINING_SIZE {
        return Err(Error::OutOfBounds(format!(
            "crop {ch}x{cw} at ({oy}, {ox}) does not fit a {TRAINING_SIZE}x{TRAINING_SIZE} frame"
        )));
    }
    let resized = resize_bilinear(frame, TRAINING_SIZE, TRAINING_SIZE)?;
    let src = resized.pixels();
    let mut crop = Vec::with_capacity(ch * cw);
    for y in oy..oy + ch {
        crop.extend_from_slice(&src[y * TRAINING_SIZE + ox..y * TRAINING_SIZE + ox + cw]);
    }
    let (rotated, h, w) = rotation.apply(&crop, ch, cw);
    Ok(Frame::new(h, w, rotated, ValueRange::Raw8Bit)?
        .with_pitch_um(frame.pixel_pitch_um())
        .normalize())
}
