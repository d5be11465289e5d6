use acoustic_dsp::{FrameConfig, WindowShape};
use acoustic_pipelines::synth::*;
use proptest::prelude::*;

fn sed_frame() -> FrameConfig {
    FrameConfig::solve(256, 128, WindowShape::Hann).unwrap()
}

#[test]
fn denoise_snr_is_exact() {
    for snr in [0.0, -5.0, 12.5] {
        let spec = SynthSpec { snr_db: snr, clips: 5, ..SynthSpec::for_task(TaskKind::Denoise, 2) };
        for c in denoise_dataset(&spec).unwrap() {
            assert!((measured_snr(&c.clean, &c.noise) - snr).abs() < 0.1);
            for ((n, s), v) in c.noisy.iter().zip(&c.clean).zip(&c.noise) {
                assert_eq!(*n, s + v);
            }
        }
    }
}

#[test]
fn infinite_snr_adds_nothing() {
    let spec = SynthSpec { snr_db: f64::INFINITY, clips: 2, ..SynthSpec::for_task(TaskKind::Denoise, 2) };
    for c in denoise_dataset(&spec).unwrap() {
        assert!(c.noise.iter().all(|&v| v == 0.0));
        assert_eq!(c.noisy, c.clean);
    }
}

#[test]
fn zero_density_gives_silent_labels() {
    let spec = SynthSpec { event_density: 0.0, clips: 8, ..SynthSpec::for_task(TaskKind::Sed, 4) };
    for c in sed_dataset(&spec).unwrap() {
        assert!(c.events.is_empty());
        assert!(c.frame_roll(&sed_frame()).unwrap().iter().flatten().all(|&v| !v));
        assert_eq!(c.clip_labels(&sed_frame()).unwrap(), vec![false; SED_CLASSES]);
    }
}

#[test]
fn event_rolls_follow_events() {
    let spec = SynthSpec::for_task(TaskKind::Sed, 4);
    let cfg = sed_frame();
    let clips = sed_dataset(&SynthSpec { clips: 30, ..spec }).unwrap();
    assert!(clips.iter().any(|c| !c.events.is_empty()));
    for c in &clips {
        let roll = c.frame_roll(&cfg).unwrap();
        let labels = c.clip_labels(&cfg).unwrap();
        for e in &c.events {
            assert!(e.end > e.start && e.end <= c.audio.len());
            // Every event is long enough to contain a frame centre.
            assert!(labels[e.class]);
        }
        for (k, row) in roll.iter().enumerate() {
            assert_eq!(labels[k], row.iter().any(|&v| v));
        }
    }
}

#[test]
fn identical_specs_give_identical_data() {
    for task in [TaskKind::Denoise, TaskKind::Separate, TaskKind::Sed, TaskKind::Speaker] {
        let spec = SynthSpec { clips: 6, ..SynthSpec::for_task(task, 21) };
        let a = format!("{:?}", synth_generate(&spec).unwrap());
        let b = format!("{:?}", synth_generate(&spec).unwrap());
        assert_eq!(a, b, "{task:?}");
        let c = format!("{:?}", synth_generate(&SynthSpec { seed: 22, ..spec }).unwrap());
        assert_ne!(a, c, "{task:?}");
    }
    let spec = SynthSpec { clips: 3, ..SynthSpec::for_task(TaskKind::Doa, 21) };
    let a = doa_dataset(&spec).unwrap();
    let b = doa_dataset(&spec).unwrap();
    for (x, y) in a.scenes.iter().zip(&b.scenes) {
        assert_eq!(x.azimuths, y.azimuths);
        assert_eq!(x.observation.observed, y.observation.observed);
    }
}

#[test]
fn growing_the_dataset_keeps_earlier_clips() {
    let spec = SynthSpec { clips: 3, ..SynthSpec::for_task(TaskKind::Speaker, 8) };
    let small = speaker_dataset(&spec).unwrap();
    let large = speaker_dataset(&SynthSpec { clips: 7, ..spec }).unwrap();
    assert_eq!(small[..], large[..3]);
}

#[test]
fn mixtures_sum_their_stems() {
    let spec = SynthSpec { clips: 6, ..SynthSpec::for_task(TaskKind::Separate, 9) };
    let clips = separation_dataset(&spec).unwrap();
    for c in &clips {
        for (k, m) in c.mixture.iter().enumerate() {
            let s: f64 = c.stems.iter().map(|s| s[k]).sum();
            assert!((m - s).abs() < 1e-12);
        }
        let mut combs = c.combs.clone();
        combs.sort_unstable();
        assert_eq!(combs, vec![0, 1]);
    }
    // Stem order is shuffled per clip.
    assert!(clips.iter().any(|c| c.combs[0] == 1) && clips.iter().any(|c| c.combs[0] == 0));
}

#[test]
fn comb_frequencies_are_disjoint() {
    for count in [2, 3] {
        let combs: Vec<Vec<f64>> = (0..count).map(|j| comb_frequencies(j, count, 8000)).collect();
        assert_eq!(combs[0][0], COMB_HZ * count as f64);
        for a in 0..count {
            for b in a + 1..count {
                for f in &combs[a] {
                    assert!(combs[b].iter().all(|g| (f - g).abs() >= COMB_HZ));
                }
            }
        }
    }
}

#[test]
fn doa_scenes_respect_source_gap() {
    let spec = SynthSpec { sources: 3, clips: 5, ..SynthSpec::for_task(TaskKind::Doa, 3) };
    for s in doa_dataset(&spec).unwrap().scenes {
        assert_eq!(s.azimuths.len(), 3);
        for (i, a) in s.azimuths.iter().enumerate() {
            for b in &s.azimuths[i + 1..] {
                let d = (a - b).rem_euclid(std::f64::consts::TAU);
                assert!(d.min(std::f64::consts::TAU - d) >= MIN_SOURCE_GAP);
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let base = SynthSpec::for_task(TaskKind::Separate, 1);
    assert!(synth_generate(&SynthSpec { sources: 4, ..base.clone() }).is_err());
    assert!(synth_generate(&SynthSpec { clips: 0, ..base.clone() }).is_err());
    assert!(synth_generate(&SynthSpec { duration: 0.01, ..base.clone() }).is_err());
    assert!(synth_generate(&SynthSpec { snr_db: f64::NAN, ..base.clone() }).is_err());
    assert!(denoise_dataset(&base).is_err());
    assert_eq!(TaskKind::parse("doa"), Some(TaskKind::Doa));
    assert_eq!(TaskKind::parse("nope"), None);
}

#[test]
fn stratified_split_holds_out_every_label() {
    let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
    let (train, held) = stratified_split(&labels, 3);
    assert_eq!(held.len(), 10);
    for c in 0..5 {
        assert_eq!(held.iter().filter(|&&i| labels[i] == c).count(), 2);
    }
    let mut all: Vec<usize> = train.into_iter().chain(held).collect();
    all.sort_unstable();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measured_snr_matches_request(snr in -10.0f64..20.0, seed in 0u64..1000) {
        let spec = SynthSpec { snr_db: snr, clips: 1, duration: 0.1, ..SynthSpec::for_task(TaskKind::Denoise, seed) };
        let c = &denoise_dataset(&spec).unwrap()[0];
        prop_assert!((measured_snr(&c.clean, &c.noise) - snr).abs() < 0.1);
    }

    #[test]
    fn split_partitions_clips(n in 2usize..200, seed in 0u64..1000) {
        let (train, held) = split_indices(n, seed);
        prop_assert_eq!(held.len(), (n / 5).max(1));
        let mut all: Vec<usize> = train.into_iter().chain(held).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
