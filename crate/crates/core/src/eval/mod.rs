//! Image and video quality metrics: PSNR, SSIM, Fréchet feature distance,
//! radially averaged spectra, optical flow and end-point error.

mod features;
mod flow;
mod quality;
mod report;
mod spectrum;

pub use features::{feature_distance, frechet_distance, Embedder, RandomConvEmbedder, EMBEDDER_WIDTHS};
pub use flow::{
    epe, estimate_flow, estimate_sequence_flow, read_flo, read_flo_dir, sequence_epe, write_flo, write_flo_dir,
    FlowField, FlowParams, FlowSource, FLO_MAGIC,
};
pub use quality::{psnr, ssim, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{evaluate, MetricsReport, HIGH_FREQUENCY_CUTOFF_PER_MM};
pub use spectrum::{energy_above, spectrum_profile, write_spectrum_csv, SpectrumPoint, DEFAULT_PITCH_MM};
