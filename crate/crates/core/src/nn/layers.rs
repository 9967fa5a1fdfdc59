use super::params::{Grads, ParamSet};
use super::real::Real;
use super::tensor::Tensor;

/// 2-D convolution with zero padding, lowered to one GEMM per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: usize,
    pub bias: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    /// Registers `<name>.weight` (`cout × cin × k × k`) and `<name>.bias`,
    /// both zero-initialised.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let weight = ps.push(
            format!("{name}.weight"),
            vec![cout, cin, k, k],
            vec![T::zero(); cout * cin * k * k],
        );
        let bias = ps.push(format!("{name}.bias"), vec![cout], vec![T::zero(); cout]);
        Conv2d {
            weight,
            bias,
            cin,
            cout,
            k,
            stride,
            pad,
        }
    }

    /// Output size, or `None` when the padded input is smaller than the kernel.
    pub fn out_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        (ph >= self.k && pw >= self.k)
            .then(|| ((ph - self.k) / self.stride + 1, (pw - self.k) / self.stride + 1))
    }

    /// Range of output columns whose tap `kj` lands inside `[0, w)`.
    fn valid_cols(&self, kj: usize, w: usize, ow: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > kj { (self.pad - kj).div_ceil(s) } else { 0 };
        let hi = if w + self.pad > kj {
            ((w - 1 + self.pad - kj) / s + 1).min(ow)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    fn im2col<T: Real>(&self, x: &[T], h: usize, w: usize, oh: usize, ow: usize, col: &mut [T]) {
        let (k, s, p) = (self.k, self.stride, self.pad);
        let ohw = oh * ow;
        for ci in 0..self.cin {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((ci * k + ki) * k + kj) * ohw;
                    let (lo, hi) = self.valid_cols(kj, w, ow);
                    for oy in 0..oh {
                        let dst = &mut col[row + oy * ow..row + (oy + 1) * ow];
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        dst[..lo].fill(T::zero());
                        dst[hi..].fill(T::zero());
                        if s == 1 {
                            let start = lo + kj - p;
                            dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                        } else {
                            for (ox, d) in dst[lo..hi].iter_mut().enumerate() {
                                *d = src[(ox + lo) * s + kj - p];
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Real>(&self, col: &[T], h: usize, w: usize, oh: usize, ow: usize, gx: &mut [T]) {
        let (k, s, p) = (self.k, self.stride, self.pad);
        let ohw = oh * ow;
        for ci in 0..self.cin {
            let plane = &mut gx[ci * h * w..(ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((ci * k + ki) * k + kj) * ohw;
                    let (lo, hi) = self.valid_cols(kj, w, ow);
                    for oy in 0..oh {
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &col[row + oy * ow..row + (oy + 1) * ow];
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in lo..hi {
                            dst[ox * s + kj - p] += src[ox];
                        }
                    }
                }
            }
        }
    }

    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &Tensor<T>) -> Tensor<T> {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (oh, ow) = self.out_size(x.h, x.w).expect("input smaller than kernel");
        let ckk = self.cin * self.k * self.k;
        let ohw = oh * ow;
        let (wt, bias) = (ps.get(self.weight), ps.get(self.bias));
        let mut col = vec![T::zero(); ckk * ohw];
        let mut y = Tensor::zeros(x.n, self.cout, oh, ow);
        for n in 0..x.n {
            self.im2col(x.sample(n), x.h, x.w, oh, ow, &mut col);
            let yn = y.sample_mut(n);
            super::real::matmul(self.cout, ckk, ohw, wt, false, &col, false, yn, false);
            for (co, plane) in yn.chunks_exact_mut(ohw).enumerate() {
                let b = bias[co];
                plane.iter_mut().for_each(|v| *v += b);
            }
        }
        y
    }

    /// Accumulates weight/bias gradients into `grads` (when given) and
    /// returns the input gradient (when `need_input`).
    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &Tensor<T>,
        gy: &Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let (oh, ow) = (gy.h, gy.w);
        let ckk = self.cin * self.k * self.k;
        let ohw = oh * ow;
        let wt = ps.get(self.weight);
        let mut col = vec![T::zero(); ckk * ohw];
        let mut gx = need_input.then(|| Tensor::zeros(x.n, x.c, x.h, x.w));
        for n in 0..x.n {
            let gyn = gy.sample(n);
            if let Some(g) = grads.as_deref_mut() {
                self.im2col(x.sample(n), x.h, x.w, oh, ow, &mut col);
                super::real::matmul(
                    self.cout,
                    ohw,
                    ckk,
                    gyn,
                    false,
                    &col,
                    true,
                    g.get_mut(self.weight),
                    true,
                );
                let gb = g.get_mut(self.bias);
                for (co, plane) in gyn.chunks_exact(ohw).enumerate() {
                    gb[co] += plane.iter().copied().sum::<T>();
                }
            }
            if let Some(gx) = gx.as_mut() {
                super::real::matmul(ckk, self.cout, ohw, wt, true, gyn, false, &mut col, false);
                self.col2im(&col, x.h, x.w, oh, ow, gx.sample_mut(n));
            }
        }
        gx
    }
}

/// Per-sample, per-channel normalisation with learned scale and offset.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceNorm {
    pub scale: usize,
    pub offset: usize,
    pub channels: usize,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct NormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl InstanceNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new<T: Real>(ps: &mut ParamSet<T>, name: &str, channels: usize) -> Self {
        let scale = ps.push(format!("{name}.weight"), vec![channels], vec![T::one(); channels]);
        let offset = ps.push(format!("{name}.bias"), vec![channels], vec![T::zero(); channels]);
        InstanceNorm {
            scale,
            offset,
            channels,
            eps: Self::EPS,
        }
    }

    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &Tensor<T>) -> (Tensor<T>, NormCache<T>) {
        assert_eq!(x.c, self.channels, "norm channels");
        let m = x.plane_len();
        let (gamma, beta) = (ps.get(self.scale), ps.get(self.offset));
        let mut y = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut xhat = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut inv_std = Vec::with_capacity(x.n * x.c);
        for (idx, plane) in x.data.chunks_exact(m).enumerate() {
            let c = idx % x.c;
            let mean = plane.iter().map(|v| v.to_f64().unwrap()).sum::<f64>() / m as f64;
            let var = plane
                .iter()
                .map(|v| (v.to_f64().unwrap() - mean).powi(2))
                .sum::<f64>()
                / m as f64;
            let inv = T::lit(1.0 / (var + self.eps).sqrt());
            let mean = T::lit(mean);
            let (g, b) = (gamma[c], beta[c]);
            let xh = &mut xhat.data[idx * m..(idx + 1) * m];
            let yo = &mut y.data[idx * m..(idx + 1) * m];
            for i in 0..m {
                xh[i] = (plane[i] - mean) * inv;
                yo[i] = g * xh[i] + b;
            }
            inv_std.push(inv);
        }
        (y, NormCache { xhat, inv_std })
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        cache: &NormCache<T>,
        gy: &Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        let m = gy.plane_len();
        let mf = T::from_usize(m).unwrap();
        let gamma = ps.get(self.scale);
        let mut gx = Tensor::zeros(gy.n, gy.c, gy.h, gy.w);
        for (idx, g_plane) in gy.data.chunks_exact(m).enumerate() {
            let c = idx % gy.c;
            let xh = &cache.xhat.data[idx * m..(idx + 1) * m];
            let (mut sum_g, mut sum_gx) = (T::zero(), T::zero());
            for i in 0..m {
                sum_g += g_plane[i];
                sum_gx += g_plane[i] * xh[i];
            }
            if let Some(g) = grads.as_deref_mut() {
                g.get_mut(self.scale)[c] += sum_gx;
                g.get_mut(self.offset)[c] += sum_g;
            }
            // with ĝ = γ g: dx = inv/M (M ĝ − Σĝ − x̂ Σ ĝ x̂)
            let gam = gamma[c];
            let k = cache.inv_std[idx] / mf;
            let out = &mut gx.data[idx * m..(idx + 1) * m];
            for i in 0..m {
                out[i] = k * gam * (mf * g_plane[i] - sum_g - xh[i] * sum_gx);
            }
        }
        gx
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    /// tanh, kept strictly inside (−1, 1) even where it rounds to ±1.
    Tanh,
}

impl Activation {
    pub fn apply<T: Real>(self, data: &mut [T]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => data.iter_mut().for_each(|v| *v = v.max(T::zero())),
            Activation::LeakyRelu(slope) => {
                let s = T::lit(slope);
                data.iter_mut().for_each(|v| {
                    if *v < T::zero() {
                        *v *= s
                    }
                })
            }
            Activation::Tanh => {
                let bound = T::one() - T::epsilon() / T::lit(2.0);
                data.iter_mut().for_each(|v| *v = v.tanh().max(-bound).min(bound))
            }
        }
    }

    /// Gradient through the activation, expressed via its output `y`.
    pub fn backward<T: Real>(self, y: &[T], g: &mut [T]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => g.iter_mut().zip(y).for_each(|(g, &y)| {
                if y <= T::zero() {
                    *g = T::zero()
                }
            }),
            Activation::LeakyRelu(slope) => {
                let s = T::lit(slope);
                g.iter_mut().zip(y).for_each(|(g, &y)| {
                    if y < T::zero() {
                        *g *= s
                    }
                })
            }
            Activation::Tanh => g
                .iter_mut()
                .zip(y)
                .for_each(|(g, &y)| *g *= T::one() - y * y ),
        }
    }
}

/// Convolution, optional instance norm, activation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub norm: Option<InstanceNorm>,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    input: Tensor<T>,
    norm: Option<NormCache<T>>,
    output: Tensor<T>,
}

impl ConvBlock {
    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: Tensor<T>) -> (Tensor<T>, BlockCache<T>) {
        let z = self.conv.forward(ps, &x);
        let (mut y, norm) = match &self.norm {
            Some(n) => {
                let (y, c) = n.forward(ps, &z);
                (y, Some(c))
            }
            None => (z, None),
        };
        self.act.apply(&mut y.data);
        let cache = BlockCache {
            input: x,
            norm,
            output: y.clone(),
        };
        (y, cache)
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        cache: &BlockCache<T>,
        mut gy: Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        self.act.backward(&cache.output.data, &mut gy.data);
        let gz = match (&self.norm, &cache.norm) {
            (Some(n), Some(c)) => n.backward(ps, c, &gy, grads.as_deref_mut()),
            _ => gy,
        };
        self.conv.backward(ps, &cache.input, &gz, grads, need_input)
    }
}

pub fn upsample_nearest2x<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (x.h, x.w);
    let mut y = Tensor::zeros(x.n, x.c, 2 * h, 2 * w);
    for (src, dst) in x.data.chunks_exact(h * w).zip(y.data.chunks_exact_mut(4 * h * w)) {
        for i in 0..2 * h {
            let row = &src[(i / 2) * w..(i / 2 + 1) * w];
            let out = &mut dst[i * 2 * w..(i + 1) * 2 * w];
            for j in 0..w {
                out[2 * j] = row[j];
                out[2 * j + 1] = row[j];
            }
        }
    }
    y
}

pub fn upsample_nearest2x_backward<T: Real>(gy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (gy.h / 2, gy.w / 2);
    let mut gx = Tensor::zeros(gy.n, gy.c, h, w);
    for (src, dst) in gy.data.chunks_exact(4 * h * w).zip(gx.data.chunks_exact_mut(h * w)) {
        for i in 0..2 * h {
            let row = &src[i * 2 * w..(i + 1) * 2 * w];
            let out = &mut dst[(i / 2) * w..(i / 2 + 1) * w];
            for j in 0..w {
                out[j] += row[2 * j] + row[2 * j + 1];
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_tensor(seed: u64, n: usize, c: usize, h: usize, w: usize) -> Tensor<f64> {
        let mut r = rng::stream(seed, 0);
        Tensor::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| r.gen_range(-1.0..1.0)).collect())
    }

    fn randomize(ps: &mut ParamSet<f64>, seed: u64) {
        let mut r = rng::stream(seed, 1);
        for p in ps.iter_mut() {
            p.data.iter_mut().for_each(|v| *v = r.gen_range(-0.5..0.5));
        }
    }

    fn direct_conv(conv: &Conv2d, ps: &ParamSet<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let (oh, ow) = conv.out_size(x.h, x.w).unwrap();
        let (wt, b) = (ps.get(conv.weight), ps.get(conv.bias));
        let mut y = Tensor::zeros(x.n, conv.cout, oh, ow);
        let k = conv.k;
        for n in 0..x.n {
            for co in 0..conv.cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[co];
                        for ci in 0..conv.cin {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * conv.stride + ki) as isize - conv.pad as isize;
                                    let ix = (ox * conv.stride + kj) as isize - conv.pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < x.h && (ix as usize) < x.w {
                                        acc += wt[((co * conv.cin + ci) * k + ki) * k + kj]
                                            * x.data[((n * x.c + ci) * x.h + iy as usize) * x.w + ix as usize];
                                    }
                                }
                            }
                        }
                        y.data[((n * conv.cout + co) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_loops() {
        for (k, s, p, h, w) in [(3, 1, 1, 7, 6), (4, 2, 1, 9, 8), (7, 1, 3, 8, 8), (4, 1, 1, 5, 5), (3, 2, 1, 6, 7)] {
            let mut ps = ParamSet::new();
            let conv = Conv2d::new(&mut ps, "c", 2, 3, k, s, p);
            randomize(&mut ps, k as u64);
            let x = random_tensor(7, 2, 2, h, w);
            let fast = conv.forward(&ps, &x);
            let slow = direct_conv(&conv, &ps, &x);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// ⟨conv(x), g⟩ is linear in x and in the weights, so the backward pass
    /// must satisfy the adjoint identities exactly (up to rounding).
    #[test]
    fn conv_backward_is_adjoint() {
        for (k, s, p) in [(3, 1, 1), (4, 2, 1), (7, 1, 3), (3, 2, 1)] {
            let mut ps = ParamSet::new();
            let conv = Conv2d::new(&mut ps, "c", 2, 3, k, s, p);
            randomize(&mut ps, 3);
            let x = random_tensor(1, 2, 2, 9, 10);
            let y = conv.forward(&ps, &x);
            let g = random_tensor(2, y.n, y.c, y.h, y.w);
            let mut grads = ps.zero_grads();
            let gx = conv.backward(&ps, &x, &g, Some(&mut grads), true).unwrap();
            // input adjoint: ⟨conv_nobias(x), g⟩ = ⟨x, gx⟩
            let bias_term: f64 = (0..y.n)
                .flat_map(|n| (0..y.c).map(move |c| (n, c)))
                .map(|(n, c)| {
                    let plane = &g.data[(n * y.c + c) * y.h * y.w..(n * y.c + c + 1) * y.h * y.w];
                    ps.get(conv.bias)[c] * plane.iter().sum::<f64>()
                })
                .sum();
            let lhs: f64 = y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum::<f64>() - bias_term;
            let rhs: f64 = x.data.iter().zip(&gx.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
            // weight adjoint: ⟨conv_nobias(x), g⟩ = ⟨w, gw⟩
            let rhs_w: f64 = ps.get(conv.weight).iter().zip(&grads.data[conv.weight]).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs_w).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn instance_norm_standardises_planes() {
        let mut ps = ParamSet::<f64>::new();
        let norm = InstanceNorm::new(&mut ps, "n", 3);
        let x = random_tensor(4, 2, 3, 5, 6).map(|v| 3.0 * v + 1.5);
        let (y, _) = norm.forward(&ps, &x);
        for plane in y.data.chunks_exact(30) {
            let mean: f64 = plane.iter().sum::<f64>() / 30.0;
            let var: f64 = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn instance_norm_gradient_matches_finite_differences() {
        let mut ps = ParamSet::<f64>::new();
        let norm = InstanceNorm::new(&mut ps, "n", 2);
        randomize(&mut ps, 11);
        let x = random_tensor(5, 1, 2, 3, 4);
        let g = random_tensor(6, 1, 2, 3, 4);
        let loss = |x: &Tensor<f64>| -> f64 {
            let (y, _) = norm.forward(&ps, x);
            y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = norm.forward(&ps, &x);
        let gx = norm.backward(&ps, &cache, &g, None);
        let h = 1e-6;
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((fd - gx.data[i]).abs() < 1e-6, "{i}: {fd} vs {}", gx.data[i]);
        }
    }

    #[test]
    fn upsample_round_trip_adjoint() {
        let x = random_tensor(8, 2, 3, 4, 5);
        let y = upsample_nearest2x(&x);
        assert_eq!(y.shape(), [2, 3, 8, 10]);
        assert_eq!(y.data[0], x.data[0]);
        assert_eq!(y.data[11], x.data[0]);
        let g = random_tensor(9, 2, 3, 8, 10);
        let gx = upsample_nearest2x_backward(&g);
        let lhs: f64 = y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&gx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn tanh_stays_strictly_inside() {
        let mut v = vec![100.0f32, -100.0, 0.0, 5.0];
        Activation::Tanh.apply(&mut v);
        assert!(v.iter().all(|x| x.abs() < 1.0));
        let mut d = vec![40.0f64, -40.0];
        Activation::Tanh.apply(&mut d);
        assert!(d.iter().all(|x| x.abs() < 1.0));
    }
}
