use acoustic_dsp::{FrameConfig, WindowShape};
use acoustic_pipelines::separate::{matched_si_sdr, oracle_separation, swap_stems, train_separator, SeparateConfig};
use acoustic_pipelines::synth::{separation_dataset, SynthSpec, TaskKind};

#[test]
fn ideal_masks_recover_every_stem() {
    let frame = FrameConfig::solve(512, 256, WindowShape::Hann).unwrap();
    for sources in [2, 3] {
        let spec = SynthSpec { sources, clips: 6, ..SynthSpec::for_task(TaskKind::Separate, 2) };
        for c in separation_dataset(&spec).unwrap() {
            let est = oracle_separation(&c, &frame, spec.sample_rate).unwrap();
            let (scores, chosen) = matched_si_sdr(&frame, &c.stems, &est).unwrap();
            assert!(scores.iter().all(|&s| s >= 30.0), "{scores:?}");
            // Ideal masks come out in stem order.
            assert_eq!(chosen, (0..sources).collect::<Vec<_>>());
        }
    }
}

#[test]
fn matching_follows_the_estimates() {
    let frame = FrameConfig::solve(512, 256, WindowShape::Hann).unwrap();
    let spec = SynthSpec { clips: 1, ..SynthSpec::for_task(TaskKind::Separate, 3) };
    let c = &separation_dataset(&spec).unwrap()[0];
    let mut est = c.stems.clone();
    est.reverse();
    let (scores, chosen) = matched_si_sdr(&frame, &c.stems, &est).unwrap();
    assert_eq!(chosen, vec![1, 0]);
    assert!(scores.iter().all(|&s| s > 100.0));
    assert!(matched_si_sdr(&frame, &c.stems, &est[..1]).is_err());
}

#[test]
fn pit_training_separates_and_ignores_stem_order() {
    let spec = SynthSpec::for_task(TaskKind::Separate, 5);
    let clips = separation_dataset(&spec).unwrap();
    let cfg = SeparateConfig::default();
    let (mut model, report) = train_separator(&clips, spec.sample_rate, &cfg).unwrap();
    let means = report.per_source_mean();
    assert_eq!(means.len(), 2);
    assert!(means.iter().all(|&m| m >= 10.0), "{means:?}");
    assert!(report.worst_clip_source() >= 10.0);
    for c in &report.held_out {
        let oracle: f64 = c.oracle.iter().sum();
        assert!(oracle >= 60.0);
    }
    let outputs = model.separate(&clips[0].mixture).unwrap();
    assert_eq!(outputs.len(), 2);
    assert!(outputs.iter().all(|o| o.len() == clips[0].mixture.len()));

    let (_, swapped) = train_separator(&swap_stems(&clips), spec.sample_rate, &cfg).unwrap();
    assert_eq!(report.final_pit_loss(), swapped.final_pit_loss());
    assert_eq!(report.fit, swapped.fit);
}

#[test]
fn mismatched_stem_counts_are_rejected() {
    let spec = SynthSpec { clips: 4, ..SynthSpec::for_task(TaskKind::Separate, 5) };
    let mut clips = separation_dataset(&spec).unwrap();
    clips[1].stems.pop();
    assert!(train_separator(&clips, spec.sample_rate, &SeparateConfig::default()).is_err());
}
