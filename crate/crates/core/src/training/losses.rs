use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PatchGrid;
use crate::nn::{Real, Tensor};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Weights of the high-frequency adversarial, full-frequency adversarial and
/// cycle terms of the generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub hf_adversarial: f64,
    pub full_adversarial: f64,
    pub cycle: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            hf_adversarial: 5.0,
            full_adversarial: 10.0,
            cycle: 5.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hf_adversarial", self.hf_adversarial),
            ("full_adversarial", self.full_adversarial),
            ("cycle", self.cycle),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("loss weight {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Discriminator,
    Generator,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-mean log p(z)` with `p = clamp(sigmoid(z))` and its gradient w.r.t. the
/// logits, scaled by `scale`. The gradient is zero where the clamp is active.
fn neg_log_prob<T: Real>(logits: &Tensor<T>, positive: bool, scale: f64) -> (f64, Tensor<T>) {
    let m = logits.data.len() as f64;
    let mut grad = Tensor::zeros(logits.n, logits.c, logits.h, logits.w);
    let mut sum = 0.0;
    for (g, &z) in grad.data.iter_mut().zip(&logits.data) {
        let s = sigmoid(z.to_f64().unwrap());
        // probability of the target class and its derivative w.r.t. z
        let (p, dp_dz_over_p) = if positive { (s, 1.0 - s) } else { (1.0 - s, -s) };
        let clamped = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        sum -= clamped.ln();
        *g = if clamped == p {
            T::lit(-dp_dz_over_p * scale / m)
        } else {
            T::zero()
        };
    }
    (sum / m, grad)
}

/// Generator-side (non-saturating) term `-mean log D(fake)` with gradient.
pub fn generator_adversarial_term<T: Real>(fake: &Tensor<T>, scale: f64) -> (f64, Tensor<T>) {
    neg_log_prob(fake, true, scale)
}

/// Discriminator-side `-mean[log D(real) + log(1 - D(fake))]` with the
/// gradients for the real and fake logits.
pub fn discriminator_adversarial_terms<T: Real>(
    real: &Tensor<T>,
    fake: &Tensor<T>,
    scale: f64,
) -> Result<(f64, Tensor<T>, Tensor<T>)> {
    if real.shape() != fake.shape() {
        return Err(Error::ShapeMismatch(format!(
            "real grid {:?} vs fake grid {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let (lr, gr) = neg_log_prob(real, true, scale);
    let (lf, gf) = neg_log_prob(fake, false, scale);
    Ok((lr + lf, gr, gf))
}

/// GAN loss of one discriminator on the high-frequency frames. The
/// discriminator side is minimised by the discriminator, the generator side
/// (which ignores `d_real`) by the generator.
pub fn loss_hf_adversarial<T: Real>(d_real: &PatchGrid<T>, d_fake: &PatchGrid<T>, side: Side) -> Result<f64> {
    if d_real.logits.shape() != d_fake.logits.shape() {
        return Err(Error::ShapeMismatch(format!(
            "real grid {:?} vs fake grid {:?}",
            d_real.logits.shape(),
            d_fake.logits.shape()
        )));
    }
    Ok(match side {
        Side::Discriminator => discriminator_adversarial_terms(&d_real.logits, &d_fake.logits, 1.0)?.0,
        Side::Generator => generator_adversarial_term(&d_fake.logits, 1.0).0,
    })
}

/// Sum of the GAN losses of the HQ-domain (`D_Y`) and LQ-domain (`D_X`)
/// discriminators.
pub fn loss_full_adversarial<T: Real>(
    dy_real: &PatchGrid<T>,
    dy_fake: &PatchGrid<T>,
    dx_real: &PatchGrid<T>,
    dx_fake: &PatchGrid<T>,
    side: Side,
) -> Result<f64> {
    Ok(loss_hf_adversarial(dy_real, dy_fake, side)? + loss_hf_adversarial(dx_real, dx_fake, side)?)
}

pub(crate) fn mean_abs_diff<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let s: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x.to_f64().unwrap() - y.to_f64().unwrap()).abs())
        .sum();
    Ok(s / a.data.len() as f64)
}

/// Gradient of `scale * mean|rec - target|` w.r.t. `rec` (zero at ties).
pub(crate) fn mean_abs_grad<T: Real>(rec: &Tensor<T>, target: &Tensor<T>, scale: f64) -> Tensor<T> {
    let k = T::lit(scale / rec.data.len() as f64);
    let mut g = Tensor::zeros(rec.n, rec.c, rec.h, rec.w);
    for ((g, &r), &t) in g.data.iter_mut().zip(&rec.data).zip(&target.data) {
        *g = if r > t {
            k
        } else if r < t {
            -k
        } else {
            T::zero()
        };
    }
    g
}

/// Cycle-consistency loss: per-pixel mean absolute error of both
/// reconstructions, summed.
pub fn loss_cycle<T: Real>(
    v_lq: &Tensor<T>,
    v_lq_rec: &Tensor<T>,
    v_hq: &Tensor<T>,
    v_hq_rec: &Tensor<T>,
) -> Result<f64> {
    Ok(mean_abs_diff(v_lq, v_lq_rec)? + mean_abs_diff(v_hq, v_hq_rec)?)
}

pub fn total_generator_loss(l1: f64, l2: f64, l3: f64, w: &LossWeights) -> f64 {
    w.hf_adversarial * l1 + w.full_adversarial * l2 + w.cycle * l3
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(v: f64) -> PatchGrid<f64> {
        PatchGrid {
            logits: Tensor::from_vec(1, 1, 3, 3, vec![v; 9]),
            receptive_field_px: 70,
        }
    }

    #[test]
    fn logits_far_past_the_clamp_have_zero_gradient() {
        let (l, g) = generator_adversarial_term(&Tensor::from_vec(1, 1, 1, 2, vec![40.0f64, -40.0]), 1.0);
        assert!((l - 0.5 * (-(1.0 - PROB_EPS).ln() - PROB_EPS.ln())).abs() < 1e-9);
        assert_eq!(g.data, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let z = Tensor::from_vec(1, 1, 1, 3, vec![-1.3f64, 0.2, 2.1]);
        let f = Tensor::from_vec(1, 1, 1, 3, vec![0.7f64, -0.4, 1.5]);
        let (_, gr, gf) = discriminator_adversarial_terms(&z, &f, 1.0).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut zp = z.clone();
            zp.data[i] += h;
            let mut zm = z.clone();
            zm.data[i] -= h;
            let fd = (discriminator_adversarial_terms(&zp, &f, 1.0).unwrap().0
                - discriminator_adversarial_terms(&zm, &f, 1.0).unwrap().0)
                / (2.0 * h);
            assert!((fd - gr.data[i]).abs() < 1e-8);
            let mut fp = f.clone();
            fp.data[i] += h;
            let mut fm = f.clone();
            fm.data[i] -= h;
            let fd = (discriminator_adversarial_terms(&z, &fp, 1.0).unwrap().0
                - discriminator_adversarial_terms(&z, &fm, 1.0).unwrap().0)
                / (2.0 * h);
            assert!((fd - gf.data[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let other = PatchGrid {
            logits: Tensor::from_vec(1, 1, 2, 2, vec![0.0; 4]),
            receptive_field_px: 70,
        };
        assert!(loss_hf_adversarial(&grid(0.0), &other, Side::Discriminator).is_err());
    }

    #[test]
    fn negative_weights_are_rejected() {
        let w = LossWeights {
            cycle: -1.0,
            ..LossWeights::default()
        };
        assert!(w.validate().is_err());
    }
}
