//! One function per subcommand. Every command validates its inputs, prints
//! the plan under `--dry-run`, and otherwise writes its artifacts to the
//! output directory.
//!
//! Seeds: the dataset, training run, probe clip and method randomness use
//! streams 1, 2, 3 and 4 under the root seed.

use std::path::Path;

use anyhow::{bail, Result};
use nalgebra::{DMatrix, DVector};

use acoustic_core::gradcheck;
use acoustic_core::rng;
use acoustic_detect::{write_decisions_csv, Aggregation, Thresholds};
use acoustic_dsp::spatial::{azimuth_grid, ArrayGeometry, CorrelationWeighting, MultiSpectrogram, DEFAULT_BLOCK};
use acoustic_dsp::Audio;
use acoustic_generative::{AlphaCurve, ClusterToy, Denoiser, DenoiserConfig};
use acoustic_pipelines::denoise::{interior_si_sdr, oracle_wiener, train_denoiser, DenoiseConfig, MaskLoss};
use acoustic_pipelines::doa::{azimuth_error, estimate_doa_with, DoaEstimate, DoaMethod};
use acoustic_pipelines::sed::{train_sed, SedConfig};
use acoustic_pipelines::separate::{matched_si_sdr, train_separator, SeparateConfig};
use acoustic_pipelines::speaker::{speaker_identify, train_speaker, SpeakerConfig};
use acoustic_pipelines::synth::{
    denoise_dataset, doa_dataset, doa_frame_config, sed_dataset, separation_dataset, speaker_dataset, SED_CLASSES,
    DOA_MICS, DOA_RADIUS,
};
use acoustic_pipelines::{FitReport, SynthSpec, TaskKind};
use acoustic_transforms::{
    lle_embed, mds_embed, ot_solve, squared_cost, squared_distances, tsne_embed, write_scatter, Bandwidth,
    EmbeddingResult, GramForm, LleConfig, LleWeights, TsneConfig,
};

use crate::config::{
    derive_seed, AggregationName, DoaMethodName, EmbedMethod, MaskLossName, RunConfig, DATA_STREAM, METHOD_STREAM,
    PROBE_STREAM, TRAIN_STREAM,
};
use crate::output::{csv, read_audio, read_mono, read_points, Ctx, InputError};

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn fit_history(fit: &FitReport) -> String {
    csv(
        "epoch,train_loss,val_loss",
        fit.history.iter().map(|h| vec![h.epoch.to_string(), f(h.train_loss), f(h.val_loss)]),
    )
}

fn check_rate(path: &Path, rate: u32, trained: u32) -> Result<()> {
    if rate != trained {
        bail!(InputError(format!(
            "{}: sample rate {rate} Hz differs from the training rate {trained} Hz (set synth.sample_rate)",
            path.display()
        )));
    }
    Ok(())
}

fn dataset_step(spec: &SynthSpec) -> String {
    format!(
        "generate {} {:?} clips at {} Hz, {} s, SNR {} dB",
        spec.clips, spec.task, spec.sample_rate, spec.duration, spec.snr_db
    )
}

pub fn denoise(ctx: &Ctx, cfg: &RunConfig, input: Option<&Path>) -> Result<()> {
    let spec = cfg.synth_spec(TaskKind::Denoise, derive_seed(ctx.seed, DATA_STREAM))?;
    let d = &cfg.denoise;
    let base = DenoiseConfig::default();
    let dc = DenoiseConfig {
        window_len: d.window_len.unwrap_or(base.window_len),
        hop: d.hop.unwrap_or(base.hop),
        context: d.context.unwrap_or(base.context),
        hidden: d.hidden.clone().unwrap_or(base.hidden),
        loss: match d.loss {
            Some(MaskLossName::BceMask) => MaskLoss::BceMask,
            Some(MaskLossName::Spectral) => MaskLoss::Spectral,
            None => base.loss,
        },
        train: cfg.train_config(base.train, derive_seed(ctx.seed, TRAIN_STREAM)),
    };
    let supplied = input.map(read_mono).transpose()?;
    if let (Some(p), Some((rate, _))) = (input, &supplied) {
        check_rate(p, *rate, spec.sample_rate)?;
    }
    let target = input.map_or("a generated probe clip".to_string(), |p| p.display().to_string());
    if ctx.plan(
        "denoise",
        &[
            dataset_step(&spec),
            format!("train mask network ({:?} loss, {} epochs)", dc.loss, dc.train.epochs),
            format!("enhance {target}"),
            "write history.csv, metrics.csv, enhanced.wav, model.apar (and probe_noisy.wav without --input)".into(),
        ],
    ) {
        return Ok(());
    }
    let clips = ctx.pipeline(denoise_dataset(&spec))?;
    let (mut model, report) = ctx.pipeline(train_denoiser(&clips, spec.sample_rate, &dc))?;
    ctx.write_text(
        "history.csv",
        &csv(
            "epoch,train_loss,val_loss,val_si_sdr_db",
            report
                .history
                .iter()
                .map(|h| vec![h.epoch.to_string(), f(h.train_loss), f(h.val_loss), f(h.val_si_sdr)]),
        ),
    )?;
    let mut rows: Vec<Vec<String>> = report
        .held_out
        .iter()
        .enumerate()
        .map(|(i, c)| vec![format!("held_{i}"), f(c.noisy), f(c.enhanced), f(c.oracle)])
        .collect();
    rows.push(vec!["held_mean".into(), f(report.mean_noisy()), f(report.mean_enhanced()), f(report.mean_oracle())]);
    match supplied {
        Some((rate, x)) => {
            let y = ctx.pipeline(model.enhance(&x))?;
            ctx.write_audio("enhanced.wav", &Audio::mono(rate, y))?;
        }
        None => {
            let probe_spec = SynthSpec { clips: 1, seed: derive_seed(ctx.seed, PROBE_STREAM), ..spec.clone() };
            let probe = ctx.pipeline(denoise_dataset(&probe_spec))?.remove(0);
            let y = ctx.pipeline(model.enhance(&probe.noisy))?;
            let oracle = ctx.pipeline(oracle_wiener(&probe, &model.frame, spec.sample_rate))?;
            let score = |est: &[f64]| ctx.pipeline(interior_si_sdr(&model.frame, &probe.clean, est));
            rows.push(vec!["probe".into(), f(score(&probe.noisy)?), f(score(&y)?), f(score(&oracle)?)]);
            ctx.write_audio("probe_noisy.wav", &Audio::mono(spec.sample_rate, probe.noisy.clone()))?;
            ctx.write_audio("enhanced.wav", &Audio::mono(spec.sample_rate, y))?;
        }
    }
    ctx.write_text("metrics.csv", &csv("clip,si_sdr_noisy_db,si_sdr_enhanced_db,si_sdr_oracle_db", rows))?;
    ctx.write_model("model.apar", &model.store)?;
    println!(
        "held-out SI-SDR {:.2} -> {:.2} dB (oracle {:.2} dB)",
        report.mean_noisy(),
        report.mean_enhanced(),
        report.mean_oracle()
    );
    Ok(())
}

pub fn separate(ctx: &Ctx, cfg: &RunConfig, input: Option<&Path>) -> Result<()> {
    let spec = cfg.synth_spec(TaskKind::Separate, derive_seed(ctx.seed, DATA_STREAM))?;
    let s = &cfg.separate;
    let base = SeparateConfig::default();
    let sc = SeparateConfig {
        window_len: s.window_len.unwrap_or(base.window_len),
        hop: s.hop.unwrap_or(base.hop),
        hidden: s.hidden.clone().unwrap_or(base.hidden),
        train: cfg.train_config(base.train, derive_seed(ctx.seed, TRAIN_STREAM)),
    };
    let supplied = input.map(read_mono).transpose()?;
    if let (Some(p), Some((rate, _))) = (input, &supplied) {
        check_rate(p, *rate, spec.sample_rate)?;
    }
    let target = input.map_or("a generated probe mixture".to_string(), |p| p.display().to_string());
    if ctx.plan(
        "separate",
        &[
            dataset_step(&spec),
            format!("train {}-output PIT separator ({} epochs)", spec.sources, sc.train.epochs),
            format!("separate {target}"),
            "write history.csv, metrics.csv, source_<j>.wav, model.apar (and probe_mixture.wav without --input)".into(),
        ],
    ) {
        return Ok(());
    }
    let clips = ctx.pipeline(separation_dataset(&spec))?;
    let (mut model, report) = ctx.pipeline(train_separator(&clips, spec.sample_rate, &sc))?;
    ctx.write_text("history.csv", &fit_history(&report.fit))?;
    let mut rows = Vec::new();
    for (i, c) in report.held_out.iter().enumerate() {
        for j in 0..c.si_sdr.len() {
            rows.push(vec![format!("held_{i}"), j.to_string(), c.combs[j].to_string(), f(c.si_sdr[j]), f(c.oracle[j])]);
        }
    }
    let (rate, mixture) = match supplied {
        Some(v) => v,
        None => {
            let probe_spec = SynthSpec { clips: 1, seed: derive_seed(ctx.seed, PROBE_STREAM), ..spec.clone() };
            let probe = ctx.pipeline(separation_dataset(&probe_spec))?.remove(0);
            let est = ctx.pipeline(model.separate(&probe.mixture))?;
            let (scores, _) = ctx.pipeline(matched_si_sdr(&model.frame, &probe.stems, &est))?;
            for (j, v) in scores.iter().enumerate() {
                rows.push(vec!["probe".into(), j.to_string(), probe.combs[j].to_string(), f(*v), String::new()]);
            }
            ctx.write_audio("probe_mixture.wav", &Audio::mono(spec.sample_rate, probe.mixture.clone()))?;
            (spec.sample_rate, probe.mixture)
        }
    };
    for (j, y) in ctx.pipeline(model.separate(&mixture))?.into_iter().enumerate() {
        ctx.write_audio(&format!("source_{j}.wav"), &Audio::mono(rate, y))?;
    }
    ctx.write_text("metrics.csv", &csv("clip,stem,comb,si_sdr_db,oracle_si_sdr_db", rows))?;
    ctx.write_model("model.apar", &model.store)?;
    let means = report.per_source_mean();
    println!("held-out per-source SI-SDR {means:.2?} dB, PIT loss {:.6}", report.final_pit_loss());
    Ok(())
}

fn doa_method(name: DoaMethodName) -> DoaMethod<'static> {
    match name {
        DoaMethodName::Spectrum => DoaMethod::SpatialSpectrum,
        DoaMethodName::Phat => DoaMethod::Correlation(CorrelationWeighting::Phat),
        DoaMethodName::Magnitude => DoaMethod::Correlation(CorrelationWeighting::Magnitude),
    }
}

/// Azimuths in degrees: the summary cell for one source, otherwise the
/// strongest vote peaks.
fn doa_answers(e: &DoaEstimate, grid_deg: &[f64], sources: usize) -> Vec<f64> {
    if sources <= 1 {
        return vec![grid_deg[e.summary]];
    }
    let mut out: Vec<f64> = e.peaks.iter().take(sources).map(|&p| grid_deg[p]).collect();
    while out.len() < sources {
        out.push(grid_deg[e.summary]);
    }
    out
}

pub fn doa(ctx: &Ctx, cfg: &RunConfig, input: Option<&Path>) -> Result<()> {
    let d = &cfg.doa;
    let method = d.method.unwrap_or(DoaMethodName::Spectrum);
    let block = d.block.unwrap_or(DEFAULT_BLOCK);
    let cells = d.cells.unwrap_or(72);
    if block == 0 || cells < 3 {
        bail!(crate::config::ConfigError("doa.block must be positive and doa.cells at least 3".into()));
    }
    let grid = azimuth_grid(cells);
    let grid_deg: Vec<f64> = grid.iter().map(|g| g.azimuth().to_degrees()).collect();
    let geom = ArrayGeometry::circular(DOA_MICS, DOA_RADIUS)?;
    let frame = doa_frame_config()?;
    if let Some(p) = input {
        let audio = read_audio(p)?;
        if audio.channels.len() != DOA_MICS {
            bail!(InputError(format!("{}: expected {DOA_MICS} channels, found {}", p.display(), audio.channels.len())));
        }
        let ms = MultiSpectrogram::analyse(&audio.channels, &frame, audio.sample_rate)
            .map_err(|e| InputError(format!("{}: {e}", p.display())))?;
        if ctx.plan(
            "doa",
            &[format!("{method:?} map over {cells} cells for {}", p.display()), "write frames.csv, metrics.csv".into()],
        ) {
            return Ok(());
        }
        let e = ctx.pipeline(estimate_doa_with(&ms, &geom, doa_method(method), &grid, block))?;
        ctx.write_text(
            "frames.csv",
            &csv("frame,azimuth_deg", e.argmax.iter().enumerate().map(|(t, &a)| vec![t.to_string(), f(grid_deg[a])])),
        )?;
        let peaks: Vec<String> = e.peaks.iter().map(|&p| f(grid_deg[p])).collect();
        ctx.write_text(
            "metrics.csv",
            &csv("summary_azimuth_deg,vote_peaks_deg", [vec![f(grid_deg[e.summary]), peaks.join(" ")]]),
        )?;
        println!("summary azimuth {:.1} deg", grid_deg[e.summary]);
        return Ok(());
    }
    let spec = cfg.synth_spec(TaskKind::Doa, derive_seed(ctx.seed, DATA_STREAM))?;
    if ctx.plan(
        "doa",
        &[dataset_step(&spec), format!("{method:?} map over {cells} cells, block {block}"), "write estimates.csv, metrics.csv".into()],
    ) {
        return Ok(());
    }
    let set = ctx.pipeline(doa_dataset(&spec))?;
    let results = ctx.map(&set.scenes, |s| {
        estimate_doa_with(&s.observation.observed, &geom, doa_method(method), &grid, block)
            .map(|e| doa_answers(&e, &grid_deg, s.azimuths.len()))
    });
    let mut rows = Vec::new();
    let (mut hits, mut total, mut worst, mut sum) = (0usize, 0usize, 0.0f64, 0.0);
    let cell_deg = 360.0 / cells as f64;
    for (i, (s, r)) in set.scenes.iter().zip(results).enumerate() {
        let answers = ctx.pipeline(r)?;
        for (q, &truth) in s.azimuths.iter().enumerate() {
            let best = answers
                .iter()
                .copied()
                .min_by(|a, b| azimuth_error(a.to_radians(), truth).total_cmp(&azimuth_error(b.to_radians(), truth)))
                .unwrap_or(f64::NAN);
            let err = azimuth_error(best.to_radians(), truth).to_degrees();
            rows.push(vec![i.to_string(), q.to_string(), f(truth.to_degrees()), f(best), f(err)]);
            hits += usize::from(err <= cell_deg);
            total += 1;
            worst = worst.max(err);
            sum += err;
        }
    }
    ctx.write_text("estimates.csv", &csv("scene,source,truth_deg,estimate_deg,error_deg", rows))?;
    let acc = hits as f64 / total as f64;
    ctx.write_text(
        "metrics.csv",
        &csv("sources,within_one_cell,mean_error_deg,max_error_deg", [vec![total.to_string(), f(acc), f(sum / total as f64), f(worst)]]),
    )?;
    println!("{hits}/{total} sources within one cell, worst error {worst:.2} deg");
    Ok(())
}

pub fn sed(ctx: &Ctx, cfg: &RunConfig, input: Option<&Path>) -> Result<()> {
    let spec = cfg.synth_spec(TaskKind::Sed, derive_seed(ctx.seed, DATA_STREAM))?;
    let s = &cfg.sed;
    let base = SedConfig::default();
    let aggregation = match s.aggregation {
        None => base.aggregation,
        Some(AggregationName::Max) => Aggregation::Max,
        Some(AggregationName::Mean) => Aggregation::Mean,
        Some(AggregationName::LinearSoftmax) => Aggregation::LinearSoftmax,
        Some(AggregationName::SoftmaxWeighted) => Aggregation::SoftmaxWeighted(s.tau.unwrap_or(1.0)),
    };
    let sc = SedConfig {
        window_len: s.window_len.unwrap_or(base.window_len),
        hop: s.hop.unwrap_or(base.hop),
        mel_bands: s.mel_bands.unwrap_or(base.mel_bands),
        context: s.context.unwrap_or(base.context),
        hidden: s.hidden.clone().unwrap_or(base.hidden),
        aggregation,
        loss: base.loss,
        train: cfg.train_config(base.train, derive_seed(ctx.seed, TRAIN_STREAM)),
    };
    let dt = Thresholds::default();
    let th = Thresholds {
        global: s.global.unwrap_or(dt.global),
        low: s.low.unwrap_or(dt.low),
        high: s.high.unwrap_or(dt.high),
        min_frames: s.min_frames.unwrap_or(dt.min_frames),
    };
    if let Err(e) = th.validate() {
        bail!(crate::config::ConfigError(format!("config section `sed`: {e}")));
    }
    let supplied = input.map(read_mono).transpose()?;
    if let (Some(p), Some((rate, _))) = (input, &supplied) {
        check_rate(p, *rate, spec.sample_rate)?;
    }
    let target = input.map_or("a generated probe clip".to_string(), |p| p.display().to_string());
    if ctx.plan(
        "sed",
        &[
            dataset_step(&spec),
            format!("train {SED_CLASSES}-class detector with {aggregation:?} pooling ({} epochs)", sc.train.epochs),
            format!("detect events in {target}"),
            "write history.csv, metrics.csv, decisions.csv, model.apar".into(),
        ],
    ) {
        return Ok(());
    }
    let clips = ctx.pipeline(sed_dataset(&spec))?;
    let (mut model, report) = ctx.pipeline(train_sed(&clips, spec.sample_rate, &sc))?;
    ctx.write_text("history.csv", &fit_history(&report.fit))?;
    let mut rows: Vec<Vec<String>> =
        report.class_auc.iter().enumerate().map(|(c, a)| vec![c.to_string(), f(*a)]).collect();
    rows.push(vec!["pooled".into(), f(report.frame_auc)]);
    ctx.write_text("metrics.csv", &csv("class,frame_auc", rows))?;
    let audio = match supplied {
        Some((_, x)) => x,
        None => {
            let probe_spec = SynthSpec { clips: 1, seed: derive_seed(ctx.seed, PROBE_STREAM), ..spec.clone() };
            let probe = ctx.pipeline(sed_dataset(&probe_spec))?.remove(0);
            let rate = f64::from(spec.sample_rate);
            ctx.write_text(
                "events.csv",
                &csv(
                    "class,start_s,end_s",
                    probe.events.iter().map(|e| vec![e.class.to_string(), f(e.start as f64 / rate), f(e.end as f64 / rate)]),
                ),
            )?;
            ctx.write_audio("probe.wav", &Audio::mono(spec.sample_rate, probe.audio.clone()))?;
            probe.audio
        }
    };
    let probs = ctx.pipeline(model.frame_probs(&audio))?;
    let decisions = ctx.pipeline(model.detect(&audio, &th))?;
    let frames = probs.first().map_or(0, Vec::len);
    let by_frame = |m: &Vec<Vec<f64>>| (0..frames).map(|t| m.iter().map(|r| r[t]).collect()).collect::<Vec<Vec<f64>>>();
    let dec_frames: Vec<Vec<bool>> = (0..frames).map(|t| decisions.iter().map(|r| r[t]).collect()).collect();
    let mut buf = Vec::new();
    write_decisions_csv(&mut buf, &by_frame(&probs), &dec_frames)?;
    ctx.write_text("decisions.csv", &String::from_utf8(buf)?)?;
    ctx.write_model("model.apar", &model.store)?;
    println!("held-out frame AUC {:.4}", report.frame_auc);
    Ok(())
}

pub fn speaker(ctx: &Ctx, cfg: &RunConfig, inputs: &[std::path::PathBuf]) -> Result<()> {
    let spec = cfg.synth_spec(TaskKind::Speaker, derive_seed(ctx.seed, DATA_STREAM))?;
    let s = &cfg.speaker;
    let base = SpeakerConfig::default();
    let sc = SpeakerConfig {
        window_len: s.window_len.unwrap_or(base.window_len),
        hop: s.hop.unwrap_or(base.hop),
        mel_bands: s.mel_bands.unwrap_or(base.mel_bands),
        coefficients: s.coefficients.unwrap_or(base.coefficients),
        descriptor: s.descriptor.clone().unwrap_or(base.descriptor),
        tau: s.tau.unwrap_or(base.tau),
        steps_per_epoch: s.steps_per_epoch.unwrap_or(base.steps_per_epoch),
        train: cfg.train_config(base.train, derive_seed(ctx.seed, TRAIN_STREAM)),
        enroll_clips: s.enroll_clips.unwrap_or(base.enroll_clips),
    };
    let threshold = s.threshold.unwrap_or(0.5);
    let supplied = inputs
        .iter()
        .map(|p| {
            let (rate, x) = read_mono(p)?;
            check_rate(p, rate, spec.sample_rate)?;
            Ok((p.display().to_string(), x))
        })
        .collect::<Result<Vec<_>>>()?;
    let target = if inputs.is_empty() { "one generated probe clip per speaker".to_string() } else { format!("{} input files", inputs.len()) };
    if ctx.plan(
        "speaker",
        &[
            dataset_step(&spec),
            format!("train extractor on {} speakers ({} epochs)", spec.sources, sc.train.epochs),
            format!("identify {target} at threshold {threshold}"),
            "write history.csv, registry.csv, metrics.csv, identification.csv, model.apar".into(),
        ],
    ) {
        return Ok(());
    }
    let clips = ctx.pipeline(speaker_dataset(&spec))?;
    let (mut ex, report) = ctx.pipeline(train_speaker(&clips, spec.sources, spec.sample_rate, &sc))?;
    ctx.write_text("history.csv", &fit_history(&report.fit))?;
    let dims = report.registry.first().map_or(0, |r| r.embedding.len());
    let header = std::iter::once("id,enrolled_clips".to_string())
        .chain((1..=dims).map(|i| format!("z{i}")))
        .collect::<Vec<_>>()
        .join(",");
    ctx.write_text(
        "registry.csv",
        &csv(
            &header,
            report.registry.iter().map(|r| {
                let mut row = vec![r.id.clone(), r.enrolled_clips.to_string()];
                row.extend(r.embedding.iter().map(|v| format!("{v:.9}")));
                row
            }),
        ),
    )?;
    ctx.write_text("metrics.csv", &csv("held_out_accuracy", [vec![f(report.accuracy)]]))?;
    let probes: Vec<(String, String, Vec<f64>)> = if supplied.is_empty() {
        let probe_spec = SynthSpec { clips: spec.sources, seed: derive_seed(ctx.seed, PROBE_STREAM), ..spec.clone() };
        ctx.pipeline(speaker_dataset(&probe_spec))?
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("probe_{i}"), format!("speaker{}", c.speaker), c.audio))
            .collect()
    } else {
        supplied.into_iter().map(|(name, x)| (name, String::new(), x)).collect()
    };
    let mut rows = Vec::new();
    for (name, truth, audio) in &probes {
        let id = ctx.pipeline(speaker_identify(&mut ex, audio, &report.registry, threshold))?;
        let best = id.best.map_or("none".to_string(), |b| report.registry[b].id.clone());
        rows.push(vec![name.clone(), truth.clone(), best, id.score.map_or(String::new(), f)]);
    }
    ctx.write_text("identification.csv", &csv("clip,true_speaker,identified,score", rows))?;
    ctx.write_model("model.apar", &ex.store)?;
    println!("held-out top-1 accuracy {:.3}", report.accuracy);
    Ok(())
}

pub fn visualize(ctx: &Ctx, cfg: &RunConfig, input: &Path, method: Option<EmbedMethod>) -> Result<()> {
    let v = &cfg.visualize;
    let method = method.or(v.method).unwrap_or(EmbedMethod::Tsne);
    let dims = v.dims.unwrap_or(2);
    let x = read_points(input)?;
    if ctx.plan(
        "visualize",
        &[
            format!("embed {} points of dimension {} with {method:?} into {dims} dimensions", x.nrows(), x.ncols()),
            "write scatter.csv, history.csv".into(),
        ],
    ) {
        return Ok(());
    }
    let d = squared_distances(&x);
    let e: EmbeddingResult = match method {
        EmbedMethod::Tsne => {
            let base = TsneConfig::default();
            let tc = TsneConfig {
                dims,
                bandwidth: v.perplexity.map_or(base.bandwidth.clone(), Bandwidth::Perplexity),
                iterations: v.iterations.unwrap_or(base.iterations),
                ..base
            };
            tsne_embed(&d, &tc, &mut rng::stream(ctx.seed, METHOD_STREAM))?
        }
        EmbedMethod::Mds => mds_embed(&d, dims, GramForm::Centered)?,
        EmbedMethod::Lle => lle_embed(
            &x,
            &LleConfig {
                neighbors: v.neighbors.unwrap_or(8),
                ridge: v.ridge.unwrap_or(1e-3),
                dims,
                weights: LleWeights::Constrained,
            },
        )?,
    };
    let mut buf = Vec::new();
    write_scatter(&mut buf, &e)?;
    ctx.write_text("scatter.csv", &String::from_utf8(buf)?)?;
    ctx.write_text(
        "history.csv",
        &csv("iteration,objective", e.history.iter().enumerate().map(|(i, o)| vec![i.to_string(), format!("{o:.9}")])),
    )?;
    Ok(())
}

fn columns_of(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.row_iter().map(|r| r.transpose()).collect()
}

pub fn ot(ctx: &Ctx, source: &Path, target: &Path) -> Result<()> {
    let a = read_points(source)?;
    let b = read_points(target)?;
    if a.ncols() != b.ncols() {
        bail!(InputError(format!(
            "{} has {} columns but {} has {}",
            source.display(),
            a.ncols(),
            target.display(),
            b.ncols()
        )));
    }
    if ctx.plan(
        "ot",
        &[
            format!("transport {} equally weighted points onto {} under squared distance", a.nrows(), b.nrows()),
            "write plan.csv, metrics.csv".into(),
        ],
    ) {
        return Ok(());
    }
    let c = squared_cost(&columns_of(&a), &columns_of(&b));
    let p = vec![1.0 / a.nrows() as f64; a.nrows()];
    let q = vec![1.0 / b.nrows() as f64; b.nrows()];
    let plan = ot_solve(&c, &p, &q)?;
    let mut rows = Vec::new();
    for i in 0..plan.plan.nrows() {
        for j in 0..plan.plan.ncols() {
            let m = plan.plan[(i, j)];
            if m > 0.0 {
                rows.push(vec![i.to_string(), j.to_string(), format!("{m:.12}")]);
            }
        }
    }
    ctx.write_text("plan.csv", &csv("source,target,mass", rows))?;
    ctx.write_text(
        "metrics.csv",
        &csv("cost,marginal_residual", [vec![format!("{:.12}", plan.cost), format!("{:e}", plan.marginal_residual())]]),
    )?;
    println!("transport cost {:.6}", plan.cost);
    Ok(())
}

pub fn diffuse(ctx: &Ctx, cfg: &RunConfig) -> Result<()> {
    let d = &cfg.diffuse;
    let base = DenoiserConfig::default();
    let dc = DenoiserConfig {
        steps: d.steps.unwrap_or(base.steps),
        hidden: d.hidden.unwrap_or(base.hidden),
        train_steps: d.train_steps.unwrap_or(base.train_steps),
        curve: AlphaCurve::Linear { first: 0.99, last: 0.8 },
        ..base
    };
    let samples = d.samples.unwrap_or(1000);
    if samples == 0 {
        bail!(crate::config::ConfigError("diffuse.samples must be positive".into()));
    }
    let toy = ClusterToy::default();
    if ctx.plan(
        "diffuse",
        &[
            format!("train x0-predicting denoiser: {} steps, {} updates", dc.steps, dc.train_steps),
            format!("reverse-sample {samples} points"),
            "write samples.csv, history.csv, metrics.csv".into(),
        ],
    ) {
        return Ok(());
    }
    let mut r = rng::stream(ctx.seed, METHOD_STREAM);
    let mut model = Denoiser::new(&dc, 2, &mut r)?;
    let report = model.train(&toy, &dc, &mut r)?;
    let trajectory = model.sample(samples, 2, &mut r)?;
    let x = trajectory.last().expect("trajectory includes the final step");
    ctx.write_text(
        "samples.csv",
        &csv("id,x,y", (0..x.cols()).map(|j| vec![j.to_string(), format!("{:.9}", x.at(0, j)), format!("{:.9}", x.at(1, j))])),
    )?;
    ctx.write_text(
        "history.csv",
        &csv("record,loss", report.history.iter().enumerate().map(|(i, l)| vec![i.to_string(), format!("{l:.9}")])),
    )?;
    let within = toy.fraction_within(x, 3.0);
    ctx.write_text(
        "metrics.csv",
        &csv("initial_loss,final_loss,within_3_spreads", [vec![f(report.initial_loss), f(report.final_loss), f(within)]]),
    )?;
    println!("{:.1}% of samples within 3 spreads of a center", 100.0 * within);
    Ok(())
}

pub fn gradcheck(ctx: &Ctx, cfg: &RunConfig) -> Result<()> {
    let seeds = cfg.gradcheck.seeds.clone().unwrap_or_else(|| vec![ctx.seed]);
    if ctx.plan("gradcheck", &[format!("finite-difference suite for seeds {seeds:?}"), "print a pass/fail table".into()]) {
        return Ok(());
    }
    let results = ctx.map(&seeds, |&s| gradcheck::suite(s));
    println!("{:<6} {:<40} {:>12} result", "seed", "check", "rel_error");
    let mut failed = 0;
    let mut total = 0;
    for (seed, r) in seeds.iter().zip(results) {
        for c in r? {
            println!("{seed:<6} {:<40} {:>12.3e} {}", c.name, c.rel_error, if c.passed { "PASS" } else { "FAIL" });
            failed += usize::from(!c.passed);
            total += 1;
        }
    }
    println!("{}/{total} checks passed (tolerance {:e})", total - failed, gradcheck::TOLERANCE);
    if failed > 0 {
        bail!("{failed} gradient checks failed");
    }
    Ok(())
}
