//! Plain cycle-consistent adversarial training with two generators and two
//! full-frame discriminators, kept separate from [`TrainState`] as the
//! reference the high-frequency variant reduces to when its extra term is off.
//!
//! [`TrainState`]: super::TrainState

use super::losses::{discriminator_adversarial_terms, generator_adversarial_term, mean_abs_grad};
use super::step::network_seed;
use crate::error::{Error, Result};
use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::nn::{Adam, AdamConfig, Tensor};

pub struct CycleGan {
    pub g: Generator<f32>,
    pub f: Generator<f32>,
    pub d_x: Discriminator<f32>,
    pub d_y: Discriminator<f32>,
    opt_g: Adam<f32>,
    opt_f: Adam<f32>,
    opt_dx: Adam<f32>,
    opt_dy: Adam<f32>,
    adversarial_weight: f64,
    cycle_weight: f64,
}

impl CycleGan {
    pub fn new(
        gen: GeneratorConfig,
        disc: DiscriminatorConfig,
        optimizer: AdamConfig,
        adversarial_weight: f64,
        cycle_weight: f64,
        seed: u64,
    ) -> Result<Self> {
        let g = Generator::new(gen, network_seed(seed, "G"))?;
        let f = Generator::new(gen, network_seed(seed, "F"))?;
        let d_x = Discriminator::new(disc, network_seed(seed, "D_X"))?;
        let d_y = Discriminator::new(disc, network_seed(seed, "D_Y"))?;
        Ok(CycleGan {
            opt_g: Adam::new(optimizer, &g.params),
            opt_f: Adam::new(optimizer, &f.params),
            opt_dx: Adam::new(optimizer, &d_x.params),
            opt_dy: Adam::new(optimizer, &d_y.params),
            g,
            f,
            d_x,
            d_y,
            adversarial_weight,
            cycle_weight,
        })
    }

    /// One generator update followed by one update of both discriminators on
    /// the frames that generator pass produced. Returns the generator
    /// objective.
    pub fn step(&mut self, lq: &Tensor<f32>, hq: &Tensor<f32>) -> Result<f64> {
        if lq.shape() != hq.shape() {
            return Err(Error::ShapeMismatch("LQ and HQ batches differ".into()));
        }
        let n = lq.n;
        let s = 1.0 / n as f64;
        let (wa, wc) = (self.adversarial_weight, self.cycle_weight);
        let mut gg = self.g.params.zero_grads();
        let mut gf = self.f.params.zero_grads();
        let mut fakes = Vec::with_capacity(n);
        let (mut adv_x, mut adv_y, mut cyc) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (x, y) = (lq.item(i), hq.item(i));
            let (y_fake, c_gx) = self.g.forward_train(&x)?;
            let (x_rec, c_fy) = self.f.forward_train(&y_fake)?;
            let (x_fake, c_fy0) = self.f.forward_train(&y)?;
            let (y_rec, c_gx0) = self.g.forward_train(&x_fake)?;
            let (py, c_dy) = self.d_y.forward_train(&y_fake)?;
            let (px, c_dx) = self.d_x.forward_train(&x_fake)?;
            let (ay, g_py) = generator_adversarial_term(&py.logits, wa * s);
            let (ax, g_px) = generator_adversarial_term(&px.logits, wa * s);
            let cycle = super::losses::loss_cycle(&x, &x_rec, &y, &y_rec)?;
            adv_x += ax * s;
            adv_y += ay * s;
            cyc += cycle * s;

            let mut g_y_fake = self.d_y.backward(&c_dy, g_py, None, true).expect("input grad");
            let mut g_x_fake = self.d_x.backward(&c_dx, g_px, None, true).expect("input grad");
            let back = self.f.backward(&c_fy, mean_abs_grad(&x_rec, &x, wc * s), Some(&mut gf), true);
            g_y_fake.add_assign(&back.expect("input grad"));
            let back = self.g.backward(&c_gx0, mean_abs_grad(&y_rec, &y, wc * s), Some(&mut gg), true);
            g_x_fake.add_assign(&back.expect("input grad"));
            self.g.backward(&c_gx, g_y_fake, Some(&mut gg), false);
            self.f.backward(&c_fy0, g_x_fake, Some(&mut gf), false);
            fakes.push((x_fake, y_fake));
        }
        let objective = wa * (adv_x + adv_y) + wc * cyc;
        self.opt_g.update(&mut self.g.params, &gg);
        self.opt_f.update(&mut self.f.params, &gf);

        let mut gdy = self.d_y.params.zero_grads();
        for (i, (_, y_fake)) in fakes.iter().enumerate() {
            let (zr, cr) = self.d_y.forward_train(&hq.item(i))?;
            let (zf, cf) = self.d_y.forward_train(y_fake)?;
            let (_, gr, gfk) = discriminator_adversarial_terms(&zr.logits, &zf.logits, s)?;
            self.d_y.backward(&cr, gr, Some(&mut gdy), false);
            self.d_y.backward(&cf, gfk, Some(&mut gdy), false);
        }
        let mut gdx = self.d_x.params.zero_grads();
        for (i, (x_fake, _)) in fakes.iter().enumerate() {
            let (zr, cr) = self.d_x.forward_train(&lq.item(i))?;
            let (zf, cf) = self.d_x.forward_train(x_fake)?;
            let (_, gr, gfk) = discriminator_adversarial_terms(&zr.logits, &zf.logits, s)?;
            self.d_x.backward(&cr, gr, Some(&mut gdx), false);
            self.d_x.backward(&cf, gfk, Some(&mut gdx), false);
        }
        self.opt_dx.update(&mut self.d_x.params, &gdx);
        self.opt_dy.update(&mut self.d_y.params, &gdy);
        Ok(objective)
    }
}
