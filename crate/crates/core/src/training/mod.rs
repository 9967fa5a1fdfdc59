//! Losses and the optimisation procedure.
//!
//! A training step has three sub-steps. First the two generators take one
//! optimizer step on the weighted sum of the high-frequency adversarial term,
//! the full-frame adversarial terms and the cycle term, with every
//! discriminator held fixed. Then the two full-frame discriminators step on
//! the detached generated frames, and finally the high-frequency
//! discriminator steps on the detail-only (zero-LL) reconstructions of real
//! and generated HQ frames. All GAN terms are minimised negative log
//! likelihoods; the generator side uses the non-saturating `-log D(fake)`.

mod baseline;
mod losses;
mod runner;
mod state;
mod step;

pub use baseline::CycleGan;
pub use losses::{
    discriminator_adversarial_terms, generator_adversarial_term, loss_cycle, loss_full_adversarial,
    loss_hf_adversarial, total_generator_loss, LossWeights, Side, PROB_EPS,
};
pub use runner::{assemble_batch, epoch_plan, run_training, training_pairs, Augment, RunOutputs, TrainingSummary};
pub use state::{StepTrace, TrainConfig, TrainState, TRAIN_STATE_TAG};
pub use step::{
    full_discriminator_pass, generator_pass, hf_discriminator_pass, high_frequency_tensor, network_seed,
    uses_hf_term, FullDiscriminatorPass, GeneratorPass, Networks, StepLosses,
};
