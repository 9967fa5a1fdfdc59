use std::path::Path;

use serde::{Deserialize, Serialize};

use super::losses::LossWeights;
use super::step::{
    full_discriminator_pass, generator_pass, hf_discriminator_pass, GeneratorPass, Networks, StepLosses,
};
use crate::error::{Error, Result};
use crate::imagecore::TRAINING_SIZE;
use crate::models::{read_checkpoint, write_checkpoint, Checkpoint, DiscriminatorConfig, GeneratorConfig};
use crate::nn::{Adam, AdamConfig, ParamSet, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub weights: LossWeights,
    pub optimizer: AdamConfig,
    /// Train the high-frequency discriminator. When off, `weights.hf_adversarial` must be 0.
    pub hf_discriminator: bool,
    pub batch_size: usize,
    pub epochs: usize,
    /// Side of the square training crops taken from the resized frames.
    pub crop_size: usize,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 saves only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            weights: LossWeights::default(),
            optimizer: AdamConfig::default(),
            hf_discriminator: true,
            batch_size: 10,
            epochs: 50,
            crop_size: TRAINING_SIZE,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Configuration of the plain cycle-consistent baseline: no
    /// high-frequency term and no high-frequency discriminator.
    pub fn without_hf(mut self) -> Self {
        self.weights.hf_adversarial = 0.0;
        self.hf_discriminator = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.generator.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !self.hf_discriminator && self.weights.hf_adversarial > 0.0 {
            return bad("hf_adversarial weight > 0 needs the high-frequency discriminator".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be > 0".into());
        }
        if !self.crop_size.is_multiple_of(4) || self.crop_size < 70 || self.crop_size > TRAINING_SIZE {
            return bad(format!(
                "crop_size must be a multiple of 4 in [72, {TRAINING_SIZE}], got {}",
                self.crop_size
            ));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return bad(format!("invalid optimizer settings {o:?}"));
        }
        Ok(())
    }
}

/// Everything a fed training step reads: the high-frequency frames the
/// networks actually saw, recorded for inspection.
#[derive(Clone, Debug, Default)]
pub struct StepTrace {
    pub fake_hq: Vec<Tensor<f32>>,
    /// Inputs of `d_hf` in the generator sub-step.
    pub generator_hf_inputs: Vec<Tensor<f32>>,
    /// Fake inputs of `d_hf` in its own sub-step.
    pub discriminator_hf_inputs: Vec<Tensor<f32>>,
}

/// Networks, optimizer moments and counters of a training run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainConfig,
    pub nets: Networks<f32>,
    pub opt_g: Adam<f32>,
    pub opt_f: Adam<f32>,
    pub opt_dx: Adam<f32>,
    pub opt_dy: Adam<f32>,
    pub opt_dhf: Option<Adam<f32>>,
    pub step: u64,
    pub epoch: u64,
}

pub const TRAIN_STATE_TAG: &str = "train_state";

fn non_finite(step: u64, losses: &StepLosses, what: &str) -> Error {
    Error::NonFiniteLoss {
        step,
        snapshot: serde_json::json!({ "step": step, "failed": what, "losses": losses }).to_string(),
    }
}

impl TrainState {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let nets = Networks::new(config.generator, config.discriminator, config.hf_discriminator, config.seed)?;
        let o = config.optimizer;
        Ok(TrainState {
            opt_g: Adam::new(o, &nets.g.params),
            opt_f: Adam::new(o, &nets.f.params),
            opt_dx: Adam::new(o, &nets.d_x.params),
            opt_dy: Adam::new(o, &nets.d_y.params),
            opt_dhf: nets.d_hf.as_ref().map(|d| Adam::new(o, &d.params)),
            nets,
            config,
            step: 0,
            epoch: 0,
        })
    }

    /// Sub-step 1: update `g` and `f` on the weighted objective with all
    /// discriminators frozen.
    pub fn generator_substep(&mut self, lq: &Tensor<f32>, hq: &Tensor<f32>) -> Result<GeneratorPass<f32>> {
        let pass = generator_pass(&self.nets, lq, hq, &self.config.weights)?;
        if !(pass.total.is_finite() && pass.grads_g.all_finite() && pass.grads_f.all_finite()) {
            let losses = StepLosses {
                hf_generator: pass.hf,
                full_generator_x: pass.full_x,
                full_generator_y: pass.full_y,
                cycle: pass.cycle,
                total: pass.total,
                ..Default::default()
            };
            return Err(non_finite(self.step, &losses, "generator"));
        }
        self.opt_g.update(&mut self.nets.g.params, &pass.grads_g);
        self.opt_f.update(&mut self.nets.f.params, &pass.grads_f);
        Ok(pass)
    }

    /// Sub-step 2: update `d_x` and `d_y` against the detached frames of `pass`.
    /// Returns their losses before the update.
    pub fn full_discriminator_substep(
        &mut self,
        lq: &Tensor<f32>,
        hq: &Tensor<f32>,
        pass: &GeneratorPass<f32>,
    ) -> Result<(f64, f64)> {
        let d = full_discriminator_pass(&self.nets, lq, hq, &pass.fake_lq, &pass.fake_hq)?;
        if !(d.loss_x.is_finite() && d.loss_y.is_finite() && d.grads_x.all_finite() && d.grads_y.all_finite()) {
            let losses = StepLosses {
                full_discriminator_x: d.loss_x,
                full_discriminator_y: d.loss_y,
                ..Default::default()
            };
            return Err(non_finite(self.step, &losses, "full discriminators"));
        }
        self.opt_dx.update(&mut self.nets.d_x.params, &d.grads_x);
        self.opt_dy.update(&mut self.nets.d_y.params, &d.grads_y);
        Ok((d.loss_x, d.loss_y))
    }

    /// Sub-step 3: update `d_hf` on detached high-frequency frames. Returns
    /// `None` when the run has no high-frequency discriminator.
    pub fn hf_discriminator_substep(
        &mut self,
        hq: &Tensor<f32>,
        pass: &GeneratorPass<f32>,
        trace: Option<&mut StepTrace>,
    ) -> Result<Option<f64>> {
        let (Some(d), Some(opt)) = (self.nets.d_hf.as_mut(), self.opt_dhf.as_mut()) else {
            return Ok(None);
        };
        let (loss, grads, fed) = hf_discriminator_pass(d, hq, &pass.fake_hq)?;
        if !(loss.is_finite() && grads.all_finite()) {
            let losses = StepLosses {
                hf_discriminator: Some(loss),
                ..Default::default()
            };
            return Err(non_finite(self.step, &losses, "high-frequency discriminator"));
        }
        opt.update(&mut d.params, &grads);
        if let Some(t) = trace {
            t.discriminator_hf_inputs = fed;
        }
        Ok(Some(loss))
    }

    /// One full optimisation step: the three sub-steps in order.
    pub fn train_step(&mut self, lq: &Tensor<f32>, hq: &Tensor<f32>) -> Result<StepLosses> {
        self.train_step_traced(lq, hq, None)
    }

    pub fn train_step_traced(
        &mut self,
        lq: &Tensor<f32>,
        hq: &Tensor<f32>,
        mut trace: Option<&mut StepTrace>,
    ) -> Result<StepLosses> {
        let pass = self.generator_substep(lq, hq)?;
        let (dx, dy) = self.full_discriminator_substep(lq, hq, &pass)?;
        let hf_d = self.hf_discriminator_substep(hq, &pass, trace.as_deref_mut())?;
        if let Some(t) = trace {
            t.fake_hq = pass.fake_hq.clone();
            t.generator_hf_inputs = pass.fake_hf.clone();
        }
        self.step += 1;
        Ok(StepLosses {
            hf_generator: pass.hf,
            hf_discriminator: hf_d,
            full_generator_x: pass.full_x,
            full_generator_y: pass.full_y,
            full_discriminator_x: dx,
            full_discriminator_y: dy,
            cycle: pass.cycle,
            total: pass.total,
        })
    }

    fn parts(&self) -> Vec<(&'static str, &ParamSet<f32>, &Adam<f32>)> {
        let mut v = vec![
            ("G", &self.nets.g.params, &self.opt_g),
            ("F", &self.nets.f.params, &self.opt_f),
            ("D_X", &self.nets.d_x.params, &self.opt_dx),
            ("D_Y", &self.nets.d_y.params, &self.opt_dy),
        ];
        if let (Some(d), Some(o)) = (&self.nets.d_hf, &self.opt_dhf) {
            v.push(("D_HF", &d.params, o));
        }
        v
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let steps: serde_json::Map<String, serde_json::Value> = self
            .parts()
            .iter()
            .map(|(name, _, opt)| (name.to_string(), opt.step.into()))
            .collect();
        let config = serde_json::json!({
            "train": self.config,
            "generator": self.config.generator,
            "optimizer_steps": steps,
        });
        let mut c = Checkpoint::new(TRAIN_STATE_TAG, config, self.config.seed, self.step, self.epoch);
        for (name, params, _) in self.parts() {
            c.push_params(&format!("{name}/"), params);
        }
        for (name, params, opt) in self.parts() {
            for (kind, moments) in [("m", &opt.m), ("v", &opt.v)] {
                for (p, data) in params.iter().zip(moments) {
                    c.push(format!("adam/{name}/{kind}/{}", p.name), p.shape.clone(), data.clone());
                }
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.to_checkpoint()?)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let h = &ckpt.header;
        if h.architecture != TRAIN_STATE_TAG {
            return Err(Error::ArchitectureMismatch {
                expected: TRAIN_STATE_TAG.into(),
                found: h.architecture.clone(),
            });
        }
        let corrupt = |m: String| Error::CorruptCheckpoint(m);
        let config: TrainConfig = serde_json::from_value(h.config.get("train").cloned().unwrap_or_default())
            .map_err(|e| corrupt(format!("train config: {e}")))?;
        let mut state = TrainState::new(config)?;
        state.step = h.step;
        state.epoch = h.epoch;
        let steps = h.config.get("optimizer_steps").cloned().unwrap_or_default();
        let fill = |name: &str, params: &mut ParamSet<f32>, opt: &mut Adam<f32>| -> Result<()> {
            ckpt.fill_params(&format!("{name}/"), params)?;
            opt.step = steps
                .get(name)
                .and_then(|v| v.as_u64())
                .ok_or_else(|| corrupt(format!("missing optimizer step for {name}")))?;
            for (kind, moments) in [("m", &mut opt.m), ("v", &mut opt.v)] {
                for (p, dst) in params.iter().zip(moments.iter_mut()) {
                    let key = format!("adam/{name}/{kind}/{}", p.name);
                    let src = ckpt.tensor(&key).ok_or_else(|| corrupt(format!("missing tensor {key}")))?;
                    if src.len() != dst.len() {
                        return Err(corrupt(format!("tensor {key} has {} values, expected {}", src.len(), dst.len())));
                    }
                    dst.copy_from_slice(src);
                }
            }
            Ok(())
        };
        fill("G", &mut state.nets.g.params, &mut state.opt_g)?;
        fill("F", &mut state.nets.f.params, &mut state.opt_f)?;
        fill("D_X", &mut state.nets.d_x.params, &mut state.opt_dx)?;
        fill("D_Y", &mut state.nets.d_y.params, &mut state.opt_dy)?;
        if let (Some(d), Some(o)) = (state.nets.d_hf.as_mut(), state.opt_dhf.as_mut()) {
            fill("D_HF", &mut d.params, o)?;
        }
        Ok(state)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&read_checkpoint(path)?)
    }

    /// Bitwise comparison of all weights, moments and counters.
    pub fn bitwise_eq(&self, other: &TrainState) -> bool {
        let bits = |a: &[f32], b: &[f32]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        let (pa, pb) = (self.parts(), other.parts());
        self.config == other.config
            && self.step == other.step
            && self.epoch == other.epoch
            && pa.len() == pb.len()
            && pa.iter().zip(&pb).all(|((_, p1, o1), (_, p2, o2))| {
                o1.step == o2.step
                    && p1.iter().zip(p2.iter()).all(|(a, b)| bits(&a.data, &b.data))
                    && o1.m.iter().zip(&o2.m).all(|(a, b)| bits(a, b))
                    && o1.v.iter().zip(&o2.v).all(|(a, b)| bits(a, b))
            })
    }
}
