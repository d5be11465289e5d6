use std::f64::consts::PI;

use acoustic_core::rng;
use acoustic_dsp::learned::{learned_analysis, learned_analysis_tape};
use acoustic_dsp::mel::{cepstrum, log_mel};
use acoustic_dsp::*;
use acoustic_core::{Tape, Tensor};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Independent overlap check: add shifted copies of the window on a long
/// buffer and inspect the steady-state region.
fn overlap_sum_deviation(w: &[f64], hop: usize) -> f64 {
    let lw = w.len();
    let total = 4 * lw;
    let mut acc = vec![0.0; total + lw];
    let mut start = 0;
    while start + lw <= acc.len() {
        for (i, v) in w.iter().enumerate() {
            acc[start + i] += v;
        }
        start += hop;
    }
    acc[lw..total].iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

#[test]
fn cola_windows() {
    let rect = solve_cola_window(256, 256, WindowShape::Hann).unwrap();
    assert!(rect.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    for (lw, hop) in [(512, 256), (400, 100), (512, 512), (64, 16), (48, 16)] {
        for shape in [WindowShape::Rect, WindowShape::Hann] {
            let w = solve_cola_window(lw, hop, shape).unwrap();
            assert!(cola_residual(&w, hop) < 1e-10);
            assert!(overlap_sum_deviation(&w, hop) < 1e-10, "{lw} {hop} {shape:?}");
        }
    }
    let hann = solve_cola_window(512, 256, WindowShape::Hann).unwrap();
    assert!((hann[256] - 1.0).abs() < 1e-15 && hann[0] == 0.0);
}

#[test]
fn unit_hop_accepts_any_normalized_window() {
    let mut w: Vec<f64> = (0..10).map(|i| f64::from(i + 1)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    assert!(FrameConfig::new(10, 1, w).is_ok());
    assert!(FrameConfig::new(10, 1, vec![0.2; 10]).is_err());
}

#[test]
fn bad_framings_are_rejected() {
    assert!(matches!(
        solve_cola_window(100, 200, WindowShape::Rect),
        Err(DspError::Infeasible { .. })
    ));
    assert!(solve_cola_window(100, 30, WindowShape::Rect).is_err());
    assert!(FrameConfig::new(4, 2, vec![0.5, 0.5, 0.5, 0.6]).is_err());
    let cfg = FrameConfig::solve(64, 16, WindowShape::Hann).unwrap();
    assert!(matches!(stft(&[0.0; 10], &cfg, 8000), Err(DspError::TooShort { .. })));
}

#[test]
fn round_trip_interior() {
    for (lw, hop) in [(512, 256), (400, 100), (512, 512)] {
        let cfg = FrameConfig::solve(lw, hop, WindowShape::Hann).unwrap();
        let x = noise(16000, lw as u64 + hop as u64);
        let spec = stft(&x, &cfg, 16000).unwrap();
        let y = istft(&spec, None).unwrap();
        let ones = vec![vec![1.0; cfg.bins()]; spec.frame_count()];
        let y2 = istft(&spec, Some(&ones)).unwrap();
        assert_eq!(y, y2);
        let range = cfg.interior(spec.frame_count());
        let err = range.clone().map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max);
        let scale = range.map(|i| x[i].abs()).fold(0.0, f64::max);
        assert!(err < 1e-8 * scale, "{lw}/{hop}: {err}");
    }
}

#[test]
fn zero_mask_silences() {
    let cfg = FrameConfig::solve(64, 32, WindowShape::Hann).unwrap();
    let spec = stft(&noise(500, 2), &cfg, 8000).unwrap();
    let zeros = vec![vec![0.0; cfg.bins()]; spec.frame_count()];
    assert!(istft(&spec, Some(&zeros)).unwrap().iter().all(|&v| v == 0.0));
    assert!(istft(&spec, Some(&zeros[1..])).is_err());
}

#[test]
fn bin_centred_sinusoid_concentrates_energy() {
    let cfg = FrameConfig::solve(256, 256, WindowShape::Rect).unwrap();
    let bin = 19;
    let x: Vec<f64> = (0..2048).map(|n| (2.0 * PI * bin as f64 * n as f64 / 256.0).sin()).collect();
    let spec = stft(&x, &cfg, 8000).unwrap();
    for fr in spec.power() {
        let total: f64 = fr.iter().sum();
        assert!(fr[bin] / total > 0.99);
    }
}

#[test]
fn frame_parseval() {
    for n in [64usize, 60] {
        let x = noise(n, n as u64);
        let dft = Dft::new(n);
        let e_time: f64 = x.iter().map(|v| v * v).sum();
        let e_freq: f64 = dft.forward_real(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        assert!((e_time - e_freq).abs() < 1e-8 * e_time);
    }
}

#[test]
fn fast_and_direct_transforms_agree() {
    // A direct DFT written out here serves as the oracle for both paths.
    for n in [16usize, 12] {
        let x = noise(n, 9);
        let got = Dft::new(n).forward_real(&x);
        for (k, g) in got.iter().enumerate() {
            let want: Complex64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| Complex64::from_polar(*v, -2.0 * PI * (k * i) as f64 / n as f64))
                .sum();
            assert!((g - want).norm() < 1e-10);
        }
        let back = Dft::new(n).inverse(&got);
        for (a, b) in back.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}

#[test]
fn mel_scale() {
    assert_eq!(hz_to_mel(0.0), 0.0);
    assert!((hz_to_mel(700.0) - 1125.0 * 2f64.ln()).abs() < 1e-12);
    assert!((hz_to_mel(700.0) - 779.8).abs() < 0.05);
    assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
}

#[test]
fn mel_bank_shape() {
    let bank = MelBank::new(24, 257, 16000).unwrap();
    assert_eq!(bank.filters(), 24);
    assert!(MelBank::new(1, 257, 16000).is_err());
    for f in 0..24 {
        let w = &bank.weights[f];
        assert!(w.iter().all(|&v| v >= 0.0));
        let peak = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        assert!(w[..=peak].windows(2).all(|p| p[0] <= p[1]));
        assert!(w[peak..].windows(2).all(|p| p[0] >= p[1]));
    }
    for f in 0..23 {
        let mid = 0.5 * (bank.edges[f + 1] + bank.edges[f + 2]);
        assert!((bank.response(f, mid) - 0.5).abs() < 1e-12);
        assert!((bank.response(f + 1, mid) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn mfcc_of_constant_log_mel_is_dc_only() {
    let c = cepstrum(&[2.5; 20], 13).unwrap();
    assert!((c[0] - 50.0).abs() < 1e-12);
    assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    assert!(cepstrum(&[1.0; 4], 5).is_err());
}

#[test]
fn mfcc_gain_changes_only_first_coefficient() {
    let cfg = FrameConfig::solve(256, 128, WindowShape::Hann).unwrap();
    let x = noise(4000, 4);
    let bank = MelBank::new(26, cfg.bins(), 16000).unwrap();
    let p1 = stft(&x, &cfg, 16000).unwrap().power();
    let loud: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
    let p2 = stft(&loud, &cfg, 16000).unwrap().power();
    let a = mfcc(&bank, &p1, 20).unwrap();
    let b = mfcc(&bank, &p2, 20).unwrap();
    let shift = 26.0 * 9f64.ln();
    for (fa, fb) in a.iter().zip(&b) {
        assert!((fb[0] - fa[0] - shift).abs() < 1e-8);
        for l in 1..20 {
            assert!((fa[l] - fb[l]).abs() < 1e-8);
        }
    }
    let lm = log_mel(&bank, &p1).unwrap();
    assert_eq!(lm[0].len(), 26);
}

#[test]
fn wiener_examples() {
    assert_eq!(wiener_gain(2.0, 2.0), 0.5);
    assert_eq!(wiener_gain(3.0, 0.0), 1.0);
    assert_eq!(wiener_gain(0.0, 0.0), 0.0);
    assert_eq!(wiener_from_snr(f64::INFINITY), 1.0);
    let m = ideal_masks(&[vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]], 0.0).unwrap();
    assert_eq!(m[0][0], vec![0.5, 0.0]);
    assert_eq!(m[1][0], vec![0.5, 0.0]);
    assert!(ideal_masks(&[], 0.0).is_err());
}

#[test]
fn learned_analysis_examples() {
    let mut r = rng::seeded(7);
    let x = Tensor::randn(vec![6, 3], 1.0, &mut r);
    let eye = Tensor::identity(6);
    let ones = Tensor::ones(vec![6, 3]);
    assert_eq!(learned_analysis(&eye, &eye, &x, &ones).unwrap(), x);
    let g = nalgebra::DMatrix::from_fn(6, 6, |_, _| r.random_range(-1.0..1.0));
    let q = g.qr().q();
    let u = Tensor::new(vec![6, 6], q.transpose().as_slice().to_vec()).unwrap();
    let y = learned_analysis(&u, &u, &x, &ones).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-10);
    }
    let z = learned_analysis(&u, &u, &x, &Tensor::zeros(vec![6, 3])).unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));

    let mut tape = Tape::new();
    let vars: Vec<_> = [&u, &u, &x, &ones].iter().map(|t| tape.leaf((*t).clone()).unwrap()).collect();
    let s = learned_analysis_tape(&mut tape, vars[0], vars[1], vars[2], vars[3]).unwrap();
    assert_eq!(tape.value(s), &y);
}

#[test]
fn wav_round_trip() {
    let dir = std::env::temp_dir().join(format!("dsp-wav-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let audio = Audio {
        sample_rate: 8000,
        channels: vec![vec![0.5, -0.25, 0.0, 0.75], vec![-1.0, 0.125, 0.5, 0.0]],
    };
    let p = dir.join("f32.wav");
    write_wav(&p, &audio, WavFormat::Float32).unwrap();
    assert_eq!(read_wav(&p).unwrap(), audio);
    let p = dir.join("i16.wav");
    write_wav(&p, &audio, WavFormat::Pcm16).unwrap();
    let back = read_wav(&p).unwrap();
    for (a, b) in back.channels.iter().flatten().zip(audio.channels.iter().flatten()) {
        assert!((a - b).abs() <= 1.0 / 32768.0);
    }
    std::fs::write(dir.join("bad.wav"), b"RIFF0000WAVEjunk").unwrap();
    assert!(matches!(read_wav(dir.join("bad.wav")), Err(DspError::Wav(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wiener_range_and_monotonicity(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g_lo = wiener_from_snr(lo);
        let g_hi = wiener_from_snr(hi);
        prop_assert!((0.0..=1.0).contains(&g_lo) && (0.0..=1.0).contains(&g_hi));
        prop_assert!(g_lo <= g_hi);
        let g = wiener_gain(a, b);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn ideal_masks_partition_unity(p in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 6), 2..5)) {
        let powers: Vec<Vec<Vec<f64>>> = p.iter().map(|s| vec![s.clone()]).collect();
        let m = ideal_masks(&powers, 0.0).unwrap();
        for k in 0..6 {
            let total: f64 = powers.iter().map(|s| s[0][k]).sum();
            let sum: f64 = m.iter().map(|s| s[0][k]).sum();
            if total > 0.0 {
                prop_assert!((sum - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(sum, 0.0);
            }
        }
        let damped = ideal_masks(&powers, 0.5).unwrap();
        for k in 0..6 {
            prop_assert!(damped.iter().map(|s| s[0][k]).sum::<f64>() <= 1.0);
        }
    }

    #[test]
    fn generated_configs_are_cola(q in 1usize..9, hop in 1usize..40, hann in any::<bool>()) {
        let shape = if hann { WindowShape::Hann } else { WindowShape::Rect };
        let w = solve_cola_window(q * hop, hop, shape).unwrap();
        prop_assert!(cola_residual(&w, hop) < 1e-10);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }
}
