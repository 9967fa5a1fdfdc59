//! Metalens optics: the hyperbolic design phase, scalar-diffraction PSFs
//! across the LWIR band, and the blur + noise operator that produces
//! low-quality frames.
//!
//! Chromatic model: the nanopillar array imposes the design phase wrapped to
//! `[0, 2π)` at the design wavelength. Each pillar is a fixed optical path
//! delay, so at wavelength `λ` the imposed phase is the wrapped design phase
//! scaled by `λ_design / λ`. Off-design light therefore splits between a
//! defocused first order and stray zeroth order.

mod degrade;
mod lens;
mod propagate;
mod psf;

pub use degrade::{convolve_reflect, degrade, PsfDegrader};
pub use lens::{phase_at, phase_profile, wrap_phase, LensSpec, PhaseMap, SamplingGrid};
pub use propagate::{angular_spectrum, band_limit, field_energy};
pub use psf::{
    psf_monochromatic, psf_polychromatic, uniform_band_weights, FocalPlane, Psf, PsfSidecar,
    SpectralSample,
};
