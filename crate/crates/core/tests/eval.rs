mod common;

use lwir_hfe::eval::{
    energy_above, epe, estimate_flow, evaluate, feature_distance, frechet_distance, psnr, read_flo, read_flo_dir,
    sequence_epe, spectrum_profile, ssim, write_flo, write_flo_dir, Embedder, FlowField, FlowParams, FlowSource,
    RandomConvEmbedder, HIGH_FREQUENCY_CUTOFF_PER_MM, PSNR_CAP_DB,
};
use lwir_hfe::imagecore::{Frame, ValueRange};
use lwir_hfe::optics::{degrade, Psf};
use proptest::prelude::*;
use rand::Rng;

const PITCH_MM: f64 = 0.012;

fn constant(v: f64) -> Frame {
    Frame::filled(32, 32, v, ValueRange::Raw8Bit).unwrap()
}

/// Top-left window of a fixture in 8-bit values.
fn fixture_8bit(name: &str, h: usize, w: usize) -> Frame {
    common::fixture_window(name, h, w).denormalize()
}

fn random_8bit(rng: &mut impl Rng, h: usize, w: usize) -> Frame {
    let px = (0..h * w).map(|_| rng.gen_range(0..=255u8) as f64).collect();
    Frame::new(h, w, px, ValueRange::Raw8Bit).unwrap()
}

#[test]
fn psnr_worked_examples() {
    let a = constant(100.0);
    assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    assert_eq!(PSNR_CAP_DB, 99.0);

    // every pixel off by 10: MSE 100
    let b = constant(110.0);
    let oracle = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
    assert!((psnr(&a, &b).unwrap() - oracle).abs() < 1e-6);
    assert!((psnr(&a, &b).unwrap() - 28.13).abs() < 5e-3);

    // 0 vs 255: MSE 255²
    assert!(psnr(&constant(0.0), &constant(255.0)).unwrap().abs() < 1e-6);

    assert!(psnr(&a, &Frame::filled(32, 16, 0.0, ValueRange::Raw8Bit).unwrap()).is_err());
}

#[test]
fn ssim_worked_examples() {
    let img = fixture_8bit("camera", 64, 64);
    assert_eq!(ssim(&img, &img).unwrap(), 1.0);

    let c1 = (0.01f64 * 255.0).powi(2);
    let oracle = (2.0 * 100.0 * 150.0 + c1) / (100.0f64.powi(2) + 150.0f64.powi(2) + c1);
    let s = ssim(&constant(100.0), &constant(150.0)).unwrap();
    assert!((s - oracle).abs() < 1e-6, "{s} vs {oracle}");

    let natural = fixture_8bit("brick", 64, 64);
    let inverted = Frame::from_fn(64, 64, ValueRange::Raw8Bit, |y, x| 255.0 - natural.get(y, x)).unwrap();
    assert!(ssim(&natural, &inverted).unwrap() < 0.0);
}

#[test]
fn frechet_worked_examples() {
    let a = vec![vec![-1.0], vec![1.0]];
    let b = vec![vec![0.0], vec![2.0]];
    assert!((frechet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    assert!((frechet_distance(&b, &a).unwrap() - 1.0).abs() < 1e-6);
    assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-12);

    // Diagonal sample covariances, so the distance splits per axis into
    // Δμ² + (σa − σb)².
    let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]];
    let b: Vec<Vec<f64>> = a.iter().map(|p| vec![3.0 * p[0] + 5.0, p[1]]).collect();
    let (va, vb) = (2.0f64 / 3.0, 6.0f64);
    let oracle = 25.0 + (va.sqrt() - vb.sqrt()).powi(2);
    assert!((frechet_distance(&a, &b).unwrap() - oracle).abs() < 1e-6);

    assert!(frechet_distance(&a[..1], &b).is_err());
}

/// Per-frame mean and spread, enough to separate gross distribution shifts.
struct Moments;

impl Embedder for Moments {
    fn dim(&self) -> usize {
        2
    }

    fn embed(&self, frame: &Frame) -> lwir_hfe::Result<Vec<f64>> {
        let m = frame.mean();
        let var = frame.pixels().iter().map(|v| (v - m).powi(2)).sum::<f64>() / frame.pixels().len() as f64;
        Ok(vec![m, var.sqrt()])
    }
}

#[test]
fn feature_distance_is_a_nonnegative_symmetric_discrepancy() {
    let mut rng = common::rng(3);
    let set_a: Vec<Frame> = (0..4).map(|_| random_8bit(&mut rng, 32, 32)).collect();
    let set_b: Vec<Frame> = ["camera", "brick", "grass"].iter().map(|n| fixture_8bit(n, 32, 32)).collect();
    for embedder in [&Moments as &dyn Embedder, &RandomConvEmbedder::new(0)] {
        let ab = feature_distance(&set_a, &set_b, embedder).unwrap();
        let ba = feature_distance(&set_b, &set_a, embedder).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() <= 1e-9 * ab);
        assert!(feature_distance(&set_a, &set_a, embedder).unwrap().abs() < 1e-9);
        assert!(feature_distance(&set_a[..1], &set_b, embedder).is_err());
    }
}

#[test]
fn spectrum_of_a_sinusoid_peaks_at_its_frequency() {
    let f = Frame::from_fn(256, 256, ValueRange::Unbounded, |_, x| {
        (2.0 * std::f64::consts::PI * 24.0 * x as f64 / 256.0).cos()
    })
    .unwrap();
    let p = spectrum_profile(&[f], PITCH_MM).unwrap();
    let (peak, _) = p
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.magnitude.total_cmp(&b.1.magnitude))
        .unwrap();
    assert_eq!(peak, 24);
    assert!((p[peak].frequency_per_mm - 24.0 / (256.0 * PITCH_MM)).abs() < 1e-9);
    assert!((p[peak].frequency_per_mm - 7.81).abs() < 5e-3);
    for (k, point) in p.iter().enumerate() {
        if k != 24 {
            assert!(point.magnitude < 1e-12, "bin {k}: {}", point.magnitude);
        }
    }
    let nyquist = p.last().unwrap().frequency_per_mm;
    assert!((nyquist - 1.0 / (2.0 * PITCH_MM)).abs() < 1e-9);
    assert!((nyquist - 41.67).abs() < 5e-3);
}

#[test]
fn constant_frames_have_only_a_dc_bin() {
    let frames = vec![constant(40.0), constant(80.0)];
    let p = spectrum_profile(&frames, PITCH_MM).unwrap();
    assert!((p[0].magnitude - 60.0).abs() < 1e-9);
    assert!(p[1..].iter().all(|q| q.magnitude < 1e-9));
    assert!(spectrum_profile(&[], PITCH_MM).is_err());
}

#[test]
fn blurring_lowers_high_frequency_energy() {
    let sharp = common::fixture_window("gravel", 128, 128);
    let wide = Psf::from_kernel(vec![1.0; 81], 9, 12e-6).unwrap();
    let blurred = degrade(&sharp, &wide, 0.0, 0).unwrap();
    let hf = |f: &Frame| {
        energy_above(
            &spectrum_profile(&[f.denormalize()], PITCH_MM).unwrap(),
            HIGH_FREQUENCY_CUTOFF_PER_MM,
        )
    };
    assert!(hf(&sharp) > hf(&blurred), "{} vs {}", hf(&sharp), hf(&blurred));
}

/// Smooth random texture with exact periodic wrap.
fn periodic_texture(rng: &mut impl Rng, n: usize) -> Frame {
    let waves: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.gen_range(1..6) as f64,
                rng.gen_range(1..6) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(10.0..25.0),
            )
        })
        .collect();
    Frame::from_fn(n, n, ValueRange::Raw8Bit, |y, x| {
        let t = std::f64::consts::TAU / n as f64;
        128.0 + waves.iter().map(|&(ky, kx, ph, a)| a * (t * (ky * y as f64 + kx * x as f64) + ph).sin()).sum::<f64>() / 3.0
    })
    .unwrap()
}

#[test]
fn flow_recovers_a_synthetic_shift() {
    let n = 64;
    let prev = periodic_texture(&mut common::rng(4), n);
    let next = Frame::from_fn(n, n, ValueRange::Raw8Bit, |y, x| prev.get(y, (x + n - 2) % n)).unwrap();
    let flow = estimate_flow(&prev, &next, &FlowParams::default()).unwrap();
    assert_eq!(flow.dims(), (n, n));
    assert_eq!((flow.u().len(), flow.v().len()), (n * n, n * n));
    let (u, v) = flow.central_mean(0.8);
    assert!(((u - 2.0).powi(2) + v * v).sqrt() < 0.5, "mean flow ({u}, {v})");

    let still = estimate_flow(&prev, &prev, &FlowParams::default()).unwrap();
    assert!(still.u().iter().chain(still.v()).all(|&c| c == 0.0));

    let other = Frame::filled(n, n + 2, 0.0, ValueRange::Raw8Bit).unwrap();
    assert!(estimate_flow(&prev, &other, &FlowParams::default()).is_err());
}

#[test]
fn epe_worked_examples() {
    let a = FlowField::new(1, 1, vec![3.0], vec![4.0]).unwrap();
    assert!((epe(&a, &FlowField::zeros(1, 1)).unwrap() - 5.0).abs() < 1e-6);
    assert_eq!(epe(&a, &a).unwrap(), 0.0);

    let two = FlowField::new(1, 2, vec![0.0, 3.0], vec![0.0, 4.0]).unwrap();
    assert!((epe(&two, &FlowField::zeros(1, 2)).unwrap() - 2.5).abs() < 1e-6);
    assert!((epe(&FlowField::zeros(1, 2), &two).unwrap() - 2.5).abs() < 1e-6);

    assert!(epe(&a, &FlowField::zeros(1, 2)).is_err());
    let (per, mean) = sequence_epe(&[a.clone(), two.clone()], &[FlowField::zeros(1, 1), FlowField::zeros(1, 2)]).unwrap();
    assert_eq!(per.len(), 2);
    assert!((mean - 3.75).abs() < 1e-6);
}

#[test]
fn flo_files_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(5);
    let (h, w) = (7, 11);
    let mut comp = || (0..h * w).map(|_| rng.gen_range(-40.0f32..40.0)).collect::<Vec<_>>();
    let u = comp();
    let v = comp();
    let flow = FlowField::new(h, w, u, v).unwrap();
    let path = dir.path().join("a.flo");
    write_flo(&flow, &path).unwrap();
    let back = read_flo(&path).unwrap();
    assert_eq!(back.dims(), (h, w));
    assert_eq!(common::bits(back.u()), common::bits(flow.u()));
    assert_eq!(common::bits(back.v()), common::bits(flow.v()));

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"PIEH");
    assert_eq!(bytes.len(), 12 + 8 * h * w);

    let seq = dir.path().join("seq");
    write_flo_dir(&[flow.clone(), back], &seq).unwrap();
    let all = read_flo_dir(&seq).unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(common::bits(all[1].u()), common::bits(flow.u()));
    assert!(read_flo(&dir.path().join("missing.flo")).is_err());
}

#[test]
fn evaluating_a_video_against_itself() {
    let video: Vec<Frame> = (0..3)
        .map(|i| {
            let f = common::fixture("brick");
            Frame::from_fn(64, 64, ValueRange::Raw8Bit, |y, x| f.get(y, x + 2 * i)).unwrap()
        })
        .collect();
    let report = evaluate(
        &video,
        &video,
        &RandomConvEmbedder::new(0),
        &FlowSource::default(),
        &FlowSource::default(),
        PITCH_MM,
    )
    .unwrap();
    assert_eq!(report.frames, 3);
    assert!(report.psnr_db.iter().all(|&p| p == PSNR_CAP_DB));
    assert_eq!(report.mean_ssim, 1.0);
    assert_eq!(report.epe.len(), 2);
    assert_eq!(report.mean_epe, Some(0.0));
    assert!(report.feature_distance.unwrap().abs() < 1e-9);
    assert_eq!(report.spectrum_restored, report.spectrum_reference);
    assert!(evaluate(&video, &video[..2], &RandomConvEmbedder::new(0), &FlowSource::default(), &FlowSource::default(), PITCH_MM).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quality_metrics_are_symmetric(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = random_8bit(&mut rng, 16, 16);
        let b = random_8bit(&mut rng, 16, 16);
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn epe_is_symmetric_and_nonnegative(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut field = || {
            let c = (0..12).map(|_| rng.gen_range(-5.0f32..5.0)).collect::<Vec<_>>();
            let d = (0..12).map(|_| rng.gen_range(-5.0f32..5.0)).collect::<Vec<_>>();
            FlowField::new(3, 4, c, d).unwrap()
        };
        let (a, b) = (field(), field());
        let ab = epe(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, epe(&b, &a).unwrap());
    }
}
