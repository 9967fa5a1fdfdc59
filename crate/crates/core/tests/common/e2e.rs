//! Desk-scale restoration experiment: synthetic degraded/clean pairs from
//! the bundled test imagery, one training run with the high-frequency term
//! and one without, and the metrics that compare them.

use std::path::{Path, PathBuf};

use lwir_hfe::eval::{energy_above, psnr, spectrum_profile, HIGH_FREQUENCY_CUTOFF_PER_MM};
use lwir_hfe::imagecore::{
    load_frame, make_synthetic_dataset, DatasetPair, Frame, ValueRange, VideoSequence,
};
use lwir_hfe::models::{DiscriminatorConfig, Generator, GeneratorConfig};
use lwir_hfe::optics::{psf_polychromatic, uniform_band_weights, FocalPlane, LensSpec, PsfDegrader, SamplingGrid};
use lwir_hfe::training::{run_training, training_pairs, RunOutputs, TrainConfig, TrainState};

pub const IMAGES: [&str; 8] = [
    "camera", "astronaut", "brick", "grass", "gravel", "chelsea", "coffee", "rocket",
];
pub const FRAMES_PER_CLIP: usize = 8;
pub const PAN_STEP_PX: usize = 4;
pub const FRAME_SIZE: usize = 256;
pub const NOISE_SIGMA: f64 = 0.01;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

/// A clip is a horizontal pan across one image: frame `i` is the 256×256
/// window starting `i·4` px from the left edge, vertically centred.
pub fn clean_clip(name: &str) -> VideoSequence {
    let img = load_frame(&data_dir().join(format!("{name}.pgm"))).expect("fixture image");
    let (h, w) = img.dims();
    let top = (h - FRAME_SIZE) / 2;
    let frames = (0..FRAMES_PER_CLIP)
        .map(|i| {
            let left = i * PAN_STEP_PX;
            assert!(left + FRAME_SIZE <= w);
            Frame::from_fn(FRAME_SIZE, FRAME_SIZE, ValueRange::Raw8Bit, |y, x| img.get(top + y, left + x))
                .expect("window")
        })
        .collect();
    VideoSequence::new(frames, VideoSequence::DEFAULT_FPS).expect("clip")
}

pub struct Dataset {
    pub train: Vec<DatasetPair>,
    pub test: Vec<DatasetPair>,
}

/// 64 pairs from 8 clips, degraded with the polychromatic design-lens PSF.
pub fn build_dataset(seed: u64) -> Dataset {
    let spec = LensSpec::default();
    let psf = psf_polychromatic(&spec, SamplingGrid::default(), FocalPlane::default(), &uniform_band_weights(&spec, 7))
        .expect("psf");
    let degrader = PsfDegrader {
        psf,
        noise_sigma: NOISE_SIGMA,
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, name) in IMAGES.iter().enumerate() {
        let clip = clean_clip(name);
        let (tr, te) = make_synthetic_dataset(&clip, &degrader, seed.wrapping_add(i as u64), 0.9).expect("dataset");
        train.extend(tr);
        test.extend(te);
    }
    Dataset { train, test }
}

#[derive(Clone, Debug)]
pub struct Scale {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub crop_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for Scale {
    fn default() -> Self {
        Scale {
            generator: GeneratorConfig {
                base_channels: 8,
                residual_blocks: 3,
            },
            discriminator: DiscriminatorConfig { base_channels: 16 },
            crop_size: 96,
            epochs: 50,
            batch_size: 10,
        }
    }
}

pub fn config(scale: &Scale, seed: u64, with_hf: bool) -> TrainConfig {
    let c = TrainConfig {
        generator: scale.generator,
        discriminator: scale.discriminator,
        crop_size: scale.crop_size,
        epochs: scale.epochs,
        batch_size: scale.batch_size,
        seed,
        ..TrainConfig::default()
    };
    if with_hf {
        c
    } else {
        c.without_hf()
    }
}

pub fn train(data: &Dataset, config: TrainConfig) -> Generator<f32> {
    let pairs = training_pairs(&data.train);
    let mut state = TrainState::new(config).expect("state");
    run_training(&mut state, &pairs, RunOutputs::default()).expect("training");
    state.nets.g
}

pub struct Outcome {
    pub psnr_degraded: f64,
    pub psnr_restored: f64,
    pub hf_energy_degraded: f64,
    pub hf_energy_restored: f64,
}

/// Test-split metrics of `g`: mean PSNR against the clean frames and summed
/// spectrum magnitude above 15 mm⁻¹.
pub fn assess(data: &Dataset, g: &Generator<f32>) -> Outcome {
    let (mut degraded, mut restored, mut clean) = (Vec::new(), Vec::new(), Vec::new());
    for pair in &data.test {
        for (lq, hq) in pair.lq.frames().iter().zip(pair.hq.frames()) {
            restored.push(g.restore_frame(lq).expect("restore"));
            degraded.push(lq.clone());
            clean.push(hq.clone());
        }
    }
    let mean_psnr = |a: &[Frame]| a.iter().zip(&clean).map(|(x, y)| psnr(x, y).unwrap()).sum::<f64>() / a.len() as f64;
    let pitch_mm = 0.012;
    let hf = |a: &[Frame]| energy_above(&spectrum_profile(a, pitch_mm).unwrap(), HIGH_FREQUENCY_CUTOFF_PER_MM);
    Outcome {
        psnr_degraded: mean_psnr(&degraded),
        psnr_restored: mean_psnr(&restored),
        hf_energy_degraded: hf(&degraded),
        hf_energy_restored: hf(&restored),
    }
}
