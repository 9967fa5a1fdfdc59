use serde::{Deserialize, Serialize};

use super::features::{feature_distance, Embedder};
use super::flow::{sequence_epe, FlowSource};
use super::quality::{psnr, ssim};
use super::spectrum::{energy_above, spectrum_profile, SpectrumPoint};
use crate::error::{Error, Result};
use crate::imagecore::{Frame, ValueRange};

/// Frequencies above this count as high-frequency content, in mm⁻¹.
pub const HIGH_FREQUENCY_CUTOFF_PER_MM: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub psnr_db: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    /// Per consecutive pair; empty for single-frame inputs.
    pub epe: Vec<f64>,
    pub mean_epe: Option<f64>,
    /// `None` when either side has fewer than two frames.
    pub feature_distance: Option<f64>,
    pub pixel_pitch_mm: f64,
    pub spectrum_restored: Vec<SpectrumPoint>,
    pub spectrum_reference: Vec<SpectrumPoint>,
    pub high_frequency_energy_restored: f64,
    pub high_frequency_energy_reference: f64,
}

fn to_8bit(frames: &[Frame]) -> Result<Vec<Frame>> {
    frames
        .iter()
        .map(|f| match f.range() {
            ValueRange::Raw8Bit => Ok(f.clone()),
            ValueRange::Normalized => Ok(f.denormalize()),
            ValueRange::Unbounded => Err(Error::ValueRange("metrics need 8-bit or normalized frames".into())),
        })
        .collect()
}

/// Full report of `restored` frames against `reference` frames, all metrics
/// computed on 8-bit values. Flows for the end-point error are taken on each
/// video separately and compared pair by pair.
pub fn evaluate(
    restored: &[Frame],
    reference: &[Frame],
    embedder: &dyn Embedder,
    flows_restored: &FlowSource,
    flows_reference: &FlowSource,
    pixel_pitch_mm: f64,
) -> Result<MetricsReport> {
    if restored.is_empty() || restored.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "need equally many restored and reference frames, got {} and {}",
            restored.len(),
            reference.len()
        )));
    }
    let (a, b) = (to_8bit(restored)?, to_8bit(reference)?);
    let psnr_db = a.iter().zip(&b).map(|(x, y)| psnr(x, y)).collect::<Result<Vec<_>>>()?;
    let ssim_v = a.iter().zip(&b).map(|(x, y)| ssim(x, y)).collect::<Result<Vec<_>>>()?;
    let (epe, mean_epe) = if a.len() >= 2 {
        let (per, mean) = sequence_epe(&flows_restored.flows(&a)?, &flows_reference.flows(&b)?)?;
        (per, Some(mean))
    } else {
        (Vec::new(), None)
    };
    let fd = if a.len() >= 2 {
        Some(feature_distance(&a, &b, embedder)?)
    } else {
        None
    };
    let spectrum_restored = spectrum_profile(&a, pixel_pitch_mm)?;
    let spectrum_reference = spectrum_profile(&b, pixel_pitch_mm)?;
    let n = a.len() as f64;
    Ok(MetricsReport {
        frames: a.len(),
        mean_psnr_db: psnr_db.iter().sum::<f64>() / n,
        mean_ssim: ssim_v.iter().sum::<f64>() / n,
        psnr_db,
        ssim: ssim_v,
        epe,
        mean_epe,
        feature_distance: fd,
        pixel_pitch_mm,
        high_frequency_energy_restored: energy_above(&spectrum_restored, HIGH_FREQUENCY_CUTOFF_PER_MM),
        high_frequency_energy_reference: energy_above(&spectrum_reference, HIGH_FREQUENCY_CUTOFF_PER_MM),
        spectrum_restored,
        spectrum_reference,
    })
}
