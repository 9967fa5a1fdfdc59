use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;

use super::state::TrainState;
use super::step::StepLosses;
use crate::error::{Error, Result};
use crate::imagecore::{preprocess, DatasetPair, Frame, Rotation, TRAINING_SIZE};
use crate::nn::Tensor;
use crate::rng;

/// Crop window and rotation drawn for one training pair in one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Augment {
    pub index: usize,
    pub origin: (usize, usize),
    pub rotation: Rotation,
}

/// Flattens the frame-aligned (LQ, HQ) pairs of every clip.
pub fn training_pairs(clips: &[DatasetPair]) -> Vec<(Frame, Frame)> {
    clips
        .iter()
        .flat_map(|c| c.lq.frames().iter().cloned().zip(c.hq.frames().iter().cloned()))
        .collect()
}

/// Seed-shuffled visiting order of `n` pairs for `epoch`, cut into batches of
/// `batch_size` (the last one may be short), each pair with its augmentation.
pub fn epoch_plan(n: usize, batch_size: usize, crop: usize, seed: u64, epoch: u64) -> Vec<Vec<Augment>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = rng::stream(seed, rng::mix(rng::label("epoch-order"), epoch));
    for i in (1..n).rev() {
        order.swap(i, shuffle.gen_range(0..=i));
    }
    let mut aug = rng::stream(seed, rng::mix(rng::label("augment"), epoch));
    let span = TRAINING_SIZE - crop;
    let plan: Vec<Augment> = order
        .into_iter()
        .map(|index| Augment {
            index,
            origin: (aug.gen_range(0..=span), aug.gen_range(0..=span)),
            rotation: Rotation::from_quarter_turns(aug.gen_range(0..4)),
        })
        .collect();
    plan.chunks(batch_size.max(1)).map(<[Augment]>::to_vec).collect()
}

fn to_tensor(frames: &[Frame]) -> Tensor<f32> {
    let (h, w) = frames[0].dims();
    let data = frames.iter().flat_map(|f| f.pixels().iter().map(|&v| v as f32)).collect();
    Tensor::from_vec(frames.len(), 1, h, w, data)
}

/// Builds normalised LQ and HQ batches; both frames of a pair get the same
/// crop and rotation so they stay aligned.
pub fn assemble_batch(
    pairs: &[(Frame, Frame)],
    batch: &[Augment],
    crop: usize,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let mut lq = Vec::with_capacity(batch.len());
    let mut hq = Vec::with_capacity(batch.len());
    for a in batch {
        let (l, h) = pairs
            .get(a.index)
            .ok_or_else(|| Error::OutOfBounds(format!("pair index {}", a.index)))?;
        lq.push(preprocess(l, (crop, crop), a.rotation, a.origin)?);
        hq.push(preprocess(h, (crop, crop), a.rotation, a.origin)?);
    }
    Ok((to_tensor(&lq), to_tensor(&hq)))
}

#[derive(Serialize)]
struct LogLine<'a> {
    epoch: u64,
    step: u64,
    batch_size: usize,
    losses: &'a StepLosses,
}

/// Where a run writes its artifacts.
#[derive(Default)]
pub struct RunOutputs<'a> {
    /// Receives one JSON object per step.
    pub log: Option<&'a mut dyn Write>,
    /// Checkpoints go here: `epoch_NNNN.ckpt` at the configured cadence,
    /// `state.ckpt` (full state) and `generator.ckpt` (G alone) at the end.
    pub checkpoint_dir: Option<&'a Path>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainingSummary {
    pub epochs: u64,
    pub steps: u64,
    pub last: Option<StepLosses>,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs epochs from `state.epoch` up to the configured count.
pub fn run_training(state: &mut TrainState, pairs: &[(Frame, Frame)], mut out: RunOutputs<'_>) -> Result<TrainingSummary> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let cfg = state.config.clone();
    let mut last = None;
    let mut checkpoints = Vec::new();
    while state.epoch < cfg.epochs as u64 {
        for batch in epoch_plan(pairs.len(), cfg.batch_size, cfg.crop_size, cfg.seed, state.epoch) {
            let (lq, hq) = assemble_batch(pairs, &batch, cfg.crop_size)?;
            let losses = state.train_step(&lq, &hq)?;
            if let Some(w) = out.log.as_deref_mut() {
                let line = LogLine {
                    epoch: state.epoch,
                    step: state.step,
                    batch_size: batch.len(),
                    losses: &losses,
                };
                serde_json::to_writer(&mut *w, &line)?;
                w.write_all(b"\n").map_err(|e| Error::io("training log", e))?;
            }
            log::debug!("epoch {} step {} total {:.4}", state.epoch, state.step, losses.total);
            last = Some(losses);
        }
        state.epoch += 1;
        log::info!("finished epoch {}/{}", state.epoch, cfg.epochs);
        if let (Some(dir), true) = (out.checkpoint_dir, cfg.checkpoint_every > 0) {
            if state.epoch.is_multiple_of(cfg.checkpoint_every as u64) {
                let p = dir.join(format!("epoch_{:04}.ckpt", state.epoch));
                state.save(&p)?;
                checkpoints.push(p);
            }
        }
    }
    if let Some(dir) = out.checkpoint_dir {
        let p = dir.join("state.ckpt");
        state.save(&p)?;
        checkpoints.push(p);
        let p = dir.join("generator.ckpt");
        state.nets.g.save(&p, cfg.seed, state.step, state.epoch)?;
        checkpoints.push(p);
    }
    Ok(TrainingSummary {
        epochs: state.epoch,
        steps: state.step,
        last,
        checkpoints,
    })
}
