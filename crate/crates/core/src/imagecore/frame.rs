use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared dynamic range of a frame's pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRange {
    /// Detector counts in `[0, 255]`.
    Raw8Bit,
    /// Network domain `[-1, 1]`.
    Normalized,
    /// Derived signals (wavelet detail, differences) with no fixed bounds.
    Unbounded,
}

impl ValueRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ValueRange::Raw8Bit => (0.0, 255.0),
            ValueRange::Normalized => (-1.0, 1.0),
            ValueRange::Unbounded => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// A single grayscale image stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    range: ValueRange,
    pixel_pitch_um: f64,
}

impl Frame {
    /// Detector pixel pitch of the reference camera.
    pub const DEFAULT_PITCH_UM: f64 = 12.0;

    pub fn new(height: usize, width: usize, pixels: Vec<f64>, range: ValueRange) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidArgument(format!(
                "frame must be at least 2x2, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {height}x{width} frame",
                pixels.len()
            )));
        }
        let (lo, hi) = range.bounds();
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < lo || **v > hi)
        {
            return Err(Error::ValueRange(format!(
                "pixel {i} = {v} outside {range:?} [{lo}, {hi}]"
            )));
        }
        Ok(Frame {
            height,
            width,
            pixels,
            range,
            pixel_pitch_um: Self::DEFAULT_PITCH_UM,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64, range: ValueRange) -> Result<Self> {
        Self::new(height, width, vec![value; height * width], range)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        range: ValueRange,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self::new(height, width, pixels, range)
    }

    pub fn from_u8(height: usize, width: usize, data: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            data.iter().map(|&v| f64::from(v)).collect(),
            ValueRange::Raw8Bit,
        )
    }

    pub fn with_pitch_um(mut self, pitch_um: f64) -> Self {
        self.pixel_pitch_um = pitch_um;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn pixel_pitch_um(&self) -> f64 {
        self.pixel_pitch_um
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Maps an 8-bit frame into the network domain, `v / 127.5 - 1`.
    /// Frames that are already normalized are returned unchanged.
    pub fn normalize(&self) -> Frame {
        match self.range {
            ValueRange::Raw8Bit => Frame {
                pixels: self.pixels.iter().map(|v| v / 127.5 - 1.0).collect(),
                range: ValueRange::Normalized,
                ..self.clone()
            },
            _ => self.clone(),
        }
    }

    /// Maps a network-domain frame back to 8-bit counts:
    /// `round(clamp((v + 1) * 127.5, 0, 255))`, halves rounded up.
    pub fn denormalize(&self) -> Frame {
        match self.range {
            ValueRange::Raw8Bit => self.clone(),
            _ => Frame {
                pixels: self.pixels.iter().map(|&v| to_u8(v) as f64).collect(),
                range: ValueRange::Raw8Bit,
                ..self.clone()
            },
        }
    }

    /// 8-bit pixel values; non-raw frames are denormalized first.
    pub fn to_u8(&self) -> Vec<u8> {
        match self.range {
            ValueRange::Raw8Bit => self.pixels.iter().map(|&v| round_half_up(v) as u8).collect(),
            _ => self.pixels.iter().map(|&v| to_u8(v)).collect(),
        }
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

fn to_u8(v: f64) -> u8 {
    round_half_up(((v + 1.0) * 127.5).clamp(0.0, 255.0)) as u8
}

/// Ordered frames sharing one geometry and value range.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl VideoSequence {
    pub const DEFAULT_FPS: f64 = 24.0;

    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                if f.dims() != first.dims() {
                    return Err(Error::dims(first.dims(), f.dims()));
                }
                if f.range() != first.range() {
                    return Err(Error::ValueRange(format!(
                        "mixed value ranges {:?} and {:?} in one sequence",
                        first.range(),
                        f.range()
                    )));
                }
            }
        }
        Ok(VideoSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Frame::dims)
    }
}
