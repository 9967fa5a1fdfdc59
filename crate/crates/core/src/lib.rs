//! Restoration pipeline for long-wave infrared metalens video.
//!
//! The crate is organised the way the data flows:
//!
//! * [`imagecore`] – frames, frame directories, preprocessing and paired
//!   dataset synthesis.
//! * [`optics`] – hyperbolic metalens phase, angular-spectrum PSFs and the
//!   degradation operator that turns clean frames into metalens frames.
//! * [`wavelet`] – single-level orthonormal Haar transform and the
//!   high-frequency extraction used by the high-frequency discriminator.
//! * [`nn`] – the small CPU tensor/layer toolkit the networks are built from.
//! * [`models`] – ResNet generator, PatchGAN discriminator, checkpoints.
//! * [`training`] – adversarial/cycle losses and the three-step update.
//! * [`eval`] – PSNR, SSIM, Fréchet feature distance, spectra, optical flow
//!   and end-point error.

pub mod error;
pub mod eval;
pub mod fft;
pub mod imagecore;
pub mod models;
pub mod nn;
pub mod optics;
pub mod rng;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
