use std::fs;
use std::path::Path;

use lwir_hfe::eval::{estimate_sequence_flow, evaluate, spectrum_profile, write_flo_dir, write_spectrum_csv, FlowSource, RandomConvEmbedder};
use lwir_hfe::imagecore::{
    frame_paths, load_manifest, load_video, make_synthetic_dataset, save_dataset, save_frame, DatasetPair,
    FrameLayout, Split, VideoSequence,
};
use lwir_hfe::models::Generator;
use lwir_hfe::optics::{phase_profile, psf_monochromatic, psf_polychromatic, uniform_band_weights, Psf, PsfDegrader};
use lwir_hfe::training::{run_training, training_pairs, RunOutputs, TrainState};
use serde::Serialize;

use crate::config::{snapshot_path, RunConfig, Snapshot};
use crate::{CliError, EvalArgs, FlowArgs, GenPsfArgs, MakeDatasetArgs, RestoreArgs, SpectrumArgs, TrainArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(lwir_hfe::Error::from)?;
    write_text(path, &(text + "\n"))
}

fn snapshot<A: Serialize>(
    command: &str,
    args: &A,
    cfg: &RunConfig,
    file: Option<&Path>,
    output: &Path,
    is_dir: bool,
) -> Result<(), CliError> {
    Snapshot {
        command,
        config_file: file,
        args,
        config: cfg,
    }
    .write(&snapshot_path(output, is_dir))
}

fn build_psf(cfg: &RunConfig, wavelength: Option<f64>) -> Result<Psf, CliError> {
    Ok(match wavelength {
        Some(lambda) => {
            let phase = phase_profile(&cfg.lens, cfg.pupil, cfg.lens.design_wavelength_m)?;
            psf_monochromatic(&phase, &cfg.lens, lambda, cfg.focal_plane)?
        }
        None => psf_polychromatic(
            &cfg.lens,
            cfg.pupil,
            cfg.focal_plane,
            &uniform_band_weights(&cfg.lens, cfg.spectral_samples),
        )?,
    })
}

pub fn gen_psf(a: &GenPsfArgs, mut cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    if let Some(n) = a.spectral_samples {
        cfg.spectral_samples = n;
    }
    cfg.validate()?;
    let psf = build_psf(&cfg, a.wavelength)?;
    let side = psf.save(&a.out, Some(cfg.lens))?;
    snapshot("gen-psf", a, &cfg, file, &a.out, false)?;
    log::info!(
        "wrote {}x{} kernel to {} (sidecar {}), {:.1}% of the focal-plane energy inside",
        psf.size,
        psf.size,
        a.out.display(),
        side.display(),
        100.0 * psf.captured_energy
    );
    Ok(())
}

/// Named clips under `root`: the directory itself when it holds frames,
/// otherwise each subdirectory that does, in name order.
fn clean_clips(root: &Path) -> Result<Vec<(String, VideoSequence)>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", root.display())));
    }
    if !frame_paths(root, FrameLayout::Auto)?.is_empty() {
        let name = root.file_name().and_then(|n| n.to_str()).unwrap_or("clip").to_string();
        return Ok(vec![(name, load_video(root, FrameLayout::Auto)?)]);
    }
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut clips = Vec::new();
    for d in dirs {
        if frame_paths(&d, FrameLayout::Auto)?.is_empty() {
            continue;
        }
        let name = d.file_name().and_then(|n| n.to_str()).unwrap_or("clip").to_string();
        clips.push((name, load_video(&d, FrameLayout::Auto)?));
    }
    if clips.is_empty() {
        return Err(lwir_hfe::Error::NoFrames(root.to_path_buf()).into());
    }
    Ok(clips)
}

pub fn make_dataset(a: &MakeDatasetArgs, mut cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    if let Some(s) = a.noise_sigma {
        cfg.noise_sigma = s;
    }
    if let Some(r) = a.split_ratio {
        cfg.split_ratio = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let clips = clean_clips(&a.clean)?;
    let psf = match &a.psf {
        Some(p) => Psf::load(p)?,
        None => build_psf(&cfg, None)?,
    };
    let degradation = serde_json::json!({
        "psf": psf.sidecar(a.psf.is_none().then_some(cfg.lens)),
        "noise_sigma": cfg.noise_sigma,
    });
    let degrader = PsfDegrader {
        psf,
        noise_sigma: cfg.noise_sigma,
    };
    let mut pairs: Vec<(String, DatasetPair)> = Vec::new();
    for (i, (name, clip)) in clips.iter().enumerate() {
        let (train, test) = make_synthetic_dataset(clip, &degrader, cfg.seed.wrapping_add(i as u64), cfg.split_ratio)?;
        pairs.extend(train.into_iter().chain(test).map(|p| (name.clone(), p)));
    }
    create_dir(&a.out)?;
    let manifest = save_dataset(&a.out, &pairs, cfg.seed, cfg.split_ratio, Some(degradation))?;
    snapshot("make-dataset", a, &cfg, file, &a.out, true)?;
    let count = |s: Split| pairs.iter().filter(|(_, p)| p.split == s).map(|(_, p)| p.len()).sum::<usize>();
    log::info!(
        "{} clips, {} train and {} test pairs in {}",
        manifest.clips.len(),
        count(Split::Train),
        count(Split::Test),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs, mut cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.crop_size {
        t.crop_size = v;
    }
    if let Some(v) = a.checkpoint_every {
        t.checkpoint_every = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.no_hf {
        cfg.train = cfg.train.clone().without_hf();
    }
    cfg.train.seed = cfg.seed;
    cfg.validate()?;

    let (_, clips) = load_manifest(&a.dataset)?;
    let train_clips: Vec<DatasetPair> = clips.into_iter().filter(|(_, p)| p.split == Split::Train).map(|(_, p)| p).collect();
    let pairs = training_pairs(&train_clips);
    if pairs.is_empty() {
        return Err(CliError::Data(format!("{}: no training pairs", a.dataset.display())));
    }
    let mut state = match &a.resume {
        Some(p) => {
            let mut s = TrainState::load(p)?;
            let mut expected = cfg.train.clone();
            expected.epochs = s.config.epochs;
            if s.config != expected {
                return Err(CliError::Usage(format!(
                    "{} was trained with a different configuration",
                    p.display()
                )));
            }
            s.config.epochs = cfg.train.epochs;
            s
        }
        None => TrainState::new(cfg.train.clone())?,
    };
    create_dir(&a.out)?;
    snapshot("train", a, &cfg, file, &a.out, true)?;
    let log_path = a.out.join("train_log.jsonl");
    let mut log = std::io::BufWriter::new(
        fs::File::create(&log_path).map_err(|e| CliError::Data(format!("cannot create {}: {e}", log_path.display())))?,
    );
    log::info!("training on {} pairs for {} epochs", pairs.len(), cfg.train.epochs);
    let summary = run_training(
        &mut state,
        &pairs,
        RunOutputs {
            log: Some(&mut log),
            checkpoint_dir: Some(&a.out),
        },
    );
    std::io::Write::flush(&mut log).map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    let summary = summary?;
    write_json(&a.out.join("summary.json"), &summary)?;
    log::info!("{} steps, checkpoints in {}", summary.steps, a.out.display());
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn restore(a: &RestoreArgs, cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    if same_dir(&a.input, &a.output) {
        return Err(CliError::Usage("restore would overwrite its input frames".into()));
    }
    let g = Generator::<f32>::load(&a.checkpoint)?;
    // Same file order as `frame_paths`; also checks that every frame decodes
    // and that all share one size.
    let video = load_video(&a.input, FrameLayout::Auto)?;
    let paths = frame_paths(&a.input, FrameLayout::Auto)?;
    create_dir(&a.output)?;
    for (path, frame) in paths.iter().zip(video.frames()) {
        let out = g.restore_frame(frame)?;
        save_frame(&out, &a.output.join(path.file_name().expect("frame file name")))?;
    }
    snapshot("restore", a, &cfg, file, &a.output, true)?;
    log::info!("restored {} frames into {}", video.len(), a.output.display());
    Ok(())
}

pub fn eval(a: &EvalArgs, mut cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = a.pitch_mm {
        cfg.pixel_pitch_mm = p;
    }
    cfg.validate()?;
    let restored = load_video(&a.restored, FrameLayout::Auto)?;
    let gt = load_video(&a.gt, FrameLayout::Auto)?;
    let source = |dir: &Option<std::path::PathBuf>| match dir {
        Some(d) => FlowSource::External(d.clone()),
        None => FlowSource::Builtin(cfg.flow),
    };
    let report = evaluate(
        restored.frames(),
        gt.frames(),
        &RandomConvEmbedder::new(cfg.embedder_seed),
        &source(&a.flows_restored),
        &source(&a.flows_gt),
        cfg.pixel_pitch_mm,
    )?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(&a.out, &report)?;
    snapshot("eval", a, &cfg, file, &a.out, false)?;
    log::info!(
        "{} frames: PSNR {:.2} dB, SSIM {:.4}, EPE {}",
        report.frames,
        report.mean_psnr_db,
        report.mean_ssim,
        report.mean_epe.map_or("n/a".to_string(), |e| format!("{e:.3}"))
    );
    Ok(())
}

pub fn spectrum(a: &SpectrumArgs, mut cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = a.pitch_mm {
        cfg.pixel_pitch_mm = p;
    }
    cfg.validate()?;
    let video = load_video(&a.input, FrameLayout::Auto)?;
    let profile = spectrum_profile(video.frames(), cfg.pixel_pitch_mm)?;
    write_spectrum_csv(&profile, &a.out)?;
    snapshot("spectrum", a, &cfg, file, &a.out, false)?;
    Ok(())
}

pub fn flow(a: &FlowArgs, cfg: RunConfig, file: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let video = load_video(&a.input, FrameLayout::Auto)?;
    let flows = estimate_sequence_flow(video.frames(), &cfg.flow)?;
    let written = write_flo_dir(&flows, &a.out)?;
    snapshot("flow", a, &cfg, file, &a.out, true)?;
    log::info!("wrote {} flow fields to {}", written.len(), a.out.display());
    Ok(())
}
