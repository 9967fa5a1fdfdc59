mod common;

use lwir_hfe::models::{
    init_weights, write_checkpoint, Checkpoint, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig,
    NetworkKind, INIT_STD,
};
use lwir_hfe::nn::{ParamSet, Tensor};
use lwir_hfe::Error;
use proptest::prelude::*;
use rand::Rng;

fn small_generator(seed: u64) -> Generator<f32> {
    Generator::new(
        GeneratorConfig {
            base_channels: 4,
            residual_blocks: 2,
        },
        seed,
    )
    .unwrap()
}

fn conv_weights(params: &ParamSet<f32>) -> Vec<f64> {
    params
        .iter()
        .filter(|p| p.name.ends_with("conv.weight"))
        .flat_map(|p| p.data.iter().map(|&v| f64::from(v)))
        .collect()
}

#[test]
fn initial_weights_follow_the_documented_distribution() {
    let g = Generator::<f32>::new(GeneratorConfig::default(), 0).unwrap();
    let d = Discriminator::<f32>::new(DiscriminatorConfig::default(), 0).unwrap();
    for params in [&g.params, &d.params] {
        let w = conv_weights(params);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * INIT_STD / n.sqrt(), "mean {mean}");
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - INIT_STD).abs() < 0.01 * INIT_STD, "sd {sd}");
        for p in params.iter() {
            if p.name.ends_with("norm.weight") {
                assert!(p.data.iter().all(|&v| v == 1.0), "{}", p.name);
            } else if !p.name.ends_with("conv.weight") {
                assert!(p.data.iter().all(|&v| v == 0.0), "{}", p.name);
            }
        }
    }
}

#[test]
fn initialisation_is_seeded() {
    let a = small_generator(1);
    let b = small_generator(1);
    let c = small_generator(2);
    assert_eq!(a.params, b.params);
    assert_ne!(conv_weights(&a.params), conv_weights(&c.params));

    let mut ps = a.params.clone();
    init_weights(&mut ps, 1, NetworkKind::Discriminator);
    assert_ne!(conv_weights(&ps), conv_weights(&a.params));
}

#[test]
fn full_size_batch_keeps_its_shape() {
    let g = small_generator(0);
    let mut rng = common::rng(0);
    let x = common::random_tensor(&mut rng, 10, 256, 256);
    let y = g.forward(&x).unwrap();
    assert_eq!(y.shape(), [10, 1, 256, 256]);
    assert!(y.data.iter().all(|&v| v > -1.0 && v < 1.0));
}

#[test]
fn zero_generator_outputs_zero() {
    let g = Generator::<f32>::zeroed(GeneratorConfig {
        base_channels: 4,
        residual_blocks: 1,
    })
    .unwrap();
    let mut rng = common::rng(1);
    let y = g.forward(&common::random_tensor(&mut rng, 2, 12, 16)).unwrap();
    assert!(y.data.iter().all(|&v| v == 0.0));
}

#[test]
fn discriminator_grid_for_full_size_frames() {
    let d = Discriminator::<f32>::new(DiscriminatorConfig::default(), 0).unwrap();
    let mut rng = common::rng(2);
    let x = common::random_tensor(&mut rng, 1, 256, 256);
    let grid = d.forward(&x).unwrap();
    assert_eq!((grid.rows(), grid.cols()), (30, 30));
    assert_eq!(grid.receptive_field_px, 70);
    let again = d.forward(&x).unwrap();
    assert_eq!(common::bits(&grid.logits.data), common::bits(&again.logits.data));
    assert!(grid.probabilities().data.iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn discriminator_rejects_frames_below_its_receptive_field() {
    let d = Discriminator::<f32>::new(DiscriminatorConfig { base_channels: 2 }, 0).unwrap();
    assert!(d.forward(&Tensor::zeros(1, 1, 69, 128)).is_err());
    assert_eq!(d.forward(&Tensor::zeros(1, 1, 70, 70)).unwrap().logits.shape(), [1, 1, 6, 6]);
}

/// Step for the exhaustive sweeps. At 1e-3 a perturbation moves some
/// ReLU/LeakyReLU inputs across zero, and the difference quotient then
/// measures the kink rather than the derivative.
const D_STEP: f64 = 1e-5;

/// Central difference of `loss` around parameter entry `(p, i)`.
fn fd<F: Fn(&ParamSet<f64>) -> f64>(params: &ParamSet<f64>, p: usize, i: usize, step: f64, loss: F) -> f64 {
    let mut plus = params.clone();
    plus.param_mut(p).data[i] += step;
    let mut minus = params.clone();
    minus.param_mut(p).data[i] -= step;
    (loss(&plus) - loss(&minus)) / (2.0 * step)
}

/// Relative error, with differences at rounding level (exactly-zero
/// gradients such as a bias ahead of a normalisation) counted as agreement.
fn rel_err(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff < 1e-10 {
        return 0.0;
    }
    diff / a.abs().max(b.abs())
}

/// A fixed random linear functional of the output, normalised by its size.
fn weights_for(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot_mean(w: &[f64], y: &Tensor<f64>) -> f64 {
    w.iter().zip(&y.data).map(|(a, b)| a * b).sum::<f64>() / y.data.len() as f64
}

#[test]
fn generator_gradients_match_finite_differences() {
    let config = GeneratorConfig {
        base_channels: 2,
        residual_blocks: 1,
    };
    let g: Generator<f64> = Generator::<f32>::new(config, 3).unwrap().cast();
    // larger weights than the initialiser so every layer contributes
    let mut g = g;
    let mut rng = common::rng(3);
    for p in g.params.iter_mut() {
        p.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
    }
    let x = common::random_tensor64(&mut rng, 1, 8, 8);
    for mean_only in [true, false] {
        let w = if mean_only { vec![1.0; 64] } else { weights_for(&mut rng, 64) };
        let loss = |ps: &ParamSet<f64>| {
            let mut net = g.clone();
            net.params = ps.clone();
            dot_mean(&w, &net.forward(&x).unwrap())
        };
        let (y, cache) = g.forward_train(&x).unwrap();
        let gy = Tensor::from_vec(1, 1, 8, 8, w.iter().map(|v| v / 64.0).collect());
        let mut grads = g.params.zero_grads();
        let gx = g.backward(&cache, gy, Some(&mut grads), true).unwrap();
        assert_eq!(y.shape(), [1, 1, 8, 8]);

        let mut worst = 0.0f64;
        for p in 0..g.params.len() {
            let len = g.params.param(p).data.len();
            for i in [0, len / 2, len - 1] {
                let numeric = fd(&g.params, p, i, D_STEP, loss);
                let e = rel_err(grads.data[p][i], numeric);
                assert!(e < 1e-4, "{} [{i}]: analytic {} numeric {numeric}", g.params.param(p).name, grads.data[p][i]);
                worst = worst.max(e);
            }
        }
        for i in [0, 27, 63] {
            let mut xp = x.clone();
            xp.data[i] += D_STEP;
            let mut xm = x.clone();
            xm.data[i] -= D_STEP;
            let numeric =
                (dot_mean(&w, &g.forward(&xp).unwrap()) - dot_mean(&w, &g.forward(&xm).unwrap())) / (2.0 * D_STEP);
            assert!(rel_err(gx.data[i], numeric) < 1e-4, "input [{i}]");
        }
    }
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    let mut d: Discriminator<f64> = Discriminator::<f32>::new(DiscriminatorConfig { base_channels: 2 }, 4).unwrap().cast();
    let mut rng = common::rng(4);
    for p in d.params.iter_mut() {
        p.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.2..0.2));
    }
    let x = common::random_tensor64(&mut rng, 1, 72, 72);
    let (grid, cache) = d.forward_train(&x).unwrap();
    let n = grid.logits.data.len();
    let w = weights_for(&mut rng, n);
    let loss = |ps: &ParamSet<f64>| {
        let mut net = d.clone();
        net.params = ps.clone();
        dot_mean(&w, &net.forward(&x).unwrap().logits)
    };
    let g_logits = Tensor::from_vec(1, 1, grid.rows(), grid.cols(), w.iter().map(|v| v / n as f64).collect());
    let mut grads = d.params.zero_grads();
    let gx = d.backward(&cache, g_logits, Some(&mut grads), true).unwrap();
    for p in 0..d.params.len() {
        let len = d.params.param(p).data.len();
        for i in [0, len / 3, len - 1] {
            let numeric = fd(&d.params, p, i, D_STEP, loss);
            assert!(
                rel_err(grads.data[p][i], numeric) < 1e-4,
                "{} [{i}]: analytic {} numeric {numeric}",
                d.params.param(p).name,
                grads.data[p][i]
            );
        }
    }
    for i in [0, 1000, 72 * 72 - 1] {
        let mut xp = x.clone();
        xp.data[i] += D_STEP;
        let mut xm = x.clone();
        xm.data[i] -= D_STEP;
        let numeric = (dot_mean(&w, &d.forward(&xp).unwrap().logits) - dot_mean(&w, &d.forward(&xm).unwrap().logits))
            / (2.0 * D_STEP);
        assert!(rel_err(gx.data[i], numeric) < 1e-4, "input [{i}]");
    }
}

#[test]
fn zeroed_residual_blocks_are_the_identity() {
    let deep = GeneratorConfig {
        base_channels: 4,
        residual_blocks: 3,
    };
    let mut g = Generator::<f32>::new(deep, 5).unwrap();
    for i in 0..3 {
        for p in g.residual_conv_params(i) {
            g.params.param_mut(p).data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    // same outer layers, no residual section at all
    let mut shallow = Generator::<f32>::zeroed(GeneratorConfig {
        residual_blocks: 0,
        ..deep
    })
    .unwrap();
    for p in shallow.params.iter_mut() {
        let src = g.params.find(&p.name).expect("shared layer");
        p.data.copy_from_slice(&g.params.param(src).data);
    }
    let mut rng = common::rng(5);
    let x = common::random_tensor(&mut rng, 2, 16, 20);
    assert_eq!(
        common::bits(&g.forward(&x).unwrap().data),
        common::bits(&shallow.forward(&x).unwrap().data)
    );
}

#[test]
fn generator_checkpoint_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    let g = small_generator(6);
    g.save(&path, 6, 11, 2).unwrap();
    let back = Generator::load(&path).unwrap();
    assert_eq!(back.config, g.config);
    for (a, b) in back.params.iter().zip(g.params.iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(common::bits(&a.data), common::bits(&b.data));
    }

    let bytes = std::fs::read(&path).unwrap();
    for cut in [4, 20, bytes.len() / 2, bytes.len() - 1] {
        let short = dir.path().join(format!("short{cut}.ckpt"));
        std::fs::write(&short, &bytes[..cut]).unwrap();
        assert!(matches!(Generator::load(&short), Err(Error::CorruptCheckpoint(_))), "cut at {cut}");
    }
}

#[test]
fn other_architectures_are_not_loaded_as_generators() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.ckpt");
    let d = Discriminator::<f32>::new(DiscriminatorConfig { base_channels: 2 }, 0).unwrap();
    let ckpt = Checkpoint::from_params(
        "discriminator",
        serde_json::to_value(d.config).unwrap(),
        0,
        0,
        0,
        "",
        &d.params,
    );
    write_checkpoint(&path, &ckpt).unwrap();
    assert!(matches!(Generator::load(&path), Err(Error::ArchitectureMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_preserves_shape_and_range(
        n in 1usize..3,
        h in 1usize..9,
        w in 1usize..9,
        seed in 0u64..1000,
        gain in 1.0f32..50.0,
    ) {
        let mut g = small_generator(seed);
        // large gains drive the output into tanh saturation
        for p in g.params.iter_mut() {
            p.data.iter_mut().for_each(|v| *v *= gain);
        }
        let mut rng = common::rng(seed);
        let x = common::random_tensor(&mut rng, n, 4 * h, 4 * w);
        let y = g.forward(&x).unwrap();
        prop_assert_eq!(y.shape(), [n, 1, 4 * h, 4 * w]);
        prop_assert!(y.data.iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn generator_rejects_sides_not_divisible_by_four(h in 1usize..40, w in 1usize..40) {
        prop_assume!(h % 4 != 0 || w % 4 != 0);
        let g = small_generator(0);
        prop_assert!(g.forward(&Tensor::zeros(1, 1, h, w)).is_err());
    }
}
