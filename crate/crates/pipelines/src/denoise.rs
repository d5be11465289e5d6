//! Multi-frame mask denoiser: log spectra of `2Q + 1` neighbouring frames
//! in, one gain per bin out.

use acoustic_core::losses::{classification, spectral_distance, si_sdr_value, ClassificationKind};
use acoustic_core::layers::Network;
use acoustic_core::{rng, Mode, ParamStore, Tape, Tensor, Var};
use acoustic_dsp::{istft, stft, wiener_mask, FrameConfig, Spectrogram, WindowShape};

use crate::error::{invalid, Result};
use crate::features::{columns, grid, hcat, log_power, select_columns, stack_context, Standardizer};
use crate::synth::{split_indices, DenoiseClip};
use crate::train::{fit, TrainConfig, INIT_STREAM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskLoss {
    /// Binary cross-entropy against the Wiener mask.
    BceMask,
    /// Squared error between masked noisy and clean magnitudes.
    Spectral,
}

impl MaskLoss {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bce_mask" => Some(Self::BceMask),
            "spectral" => Some(Self::Spectral),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseConfig {
    pub window_len: usize,
    pub hop: usize,
    /// Context frames on each side.
    pub context: usize,
    /// Hidden layers; a sigmoid layer with one output per bin is appended.
    pub hidden: String,
    pub loss: MaskLoss,
    /// `batch` counts frames.
    pub train: TrainConfig,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            window_len: 256,
            hop: 128,
            context: 2,
            hidden: "dense out=64 act=relu\ndense out=64 act=relu".into(),
            loss: MaskLoss::BceMask,
            train: TrainConfig {
                epochs: 40,
                batch: 128,
                lr: 2e-3,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenoiseModel {
    pub net: Network,
    pub store: ParamStore,
    pub scaler: Standardizer,
    pub frame: FrameConfig,
    pub context: usize,
    pub sample_rate: u32,
}

/// Run a network without gradients.
pub(crate) fn infer(net: &mut Network, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape)?;
    let xv = tape.leaf(x.clone())?;
    let y = net.forward(&mut tape, &p, xv, Mode::Infer, &mut rng::seeded(0))?;
    Ok(tape.value(y).clone())
}

fn raw_features(spec: &Spectrogram, context: usize) -> Result<Tensor> {
    columns(&stack_context(&log_power(&spec.power()), context))
}

impl DenoiseModel {
    pub fn features(&self, spec: &Spectrogram) -> Result<Tensor> {
        self.scaler.apply(&raw_features(spec, self.context)?)
    }

    /// Noisy spectrum and the predicted `[T][K]` masks.
    pub fn masks(&mut self, noisy: &[f64]) -> Result<(Spectrogram, Vec<Vec<f64>>)> {
        let spec = stft(noisy, &self.frame, self.sample_rate)?;
        let x = self.features(&spec)?;
        let m = infer(&mut self.net, &self.store, &x)?;
        Ok((spec, grid(&m)))
    }

    pub fn enhance(&mut self, noisy: &[f64]) -> Result<Vec<f64>> {
        let (spec, m) = self.masks(noisy)?;
        Ok(istft(&spec, Some(&m))?)
    }
}

/// SI-SDR restricted to samples covered by every frame.
pub fn interior_si_sdr(frame: &FrameConfig, reference: &[f64], estimate: &[f64]) -> Result<f64> {
    let frames = frame.frame_count(reference.len())?;
    let r = frame.interior(frames);
    Ok(si_sdr_value(&reference[r.clone()], &estimate[r])?)
}

/// Wiener mask from the true clean and noise powers.
pub fn oracle_mask(clip: &DenoiseClip, frame: &FrameConfig, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let s = stft(&clip.clean, frame, sample_rate)?;
    let v = stft(&clip.noise, frame, sample_rate)?;
    Ok(wiener_mask(&s.power(), &v.power())?)
}

pub fn oracle_wiener(clip: &DenoiseClip, frame: &FrameConfig, sample_rate: u32) -> Result<Vec<f64>> {
    let x = stft(&clip.noisy, frame, sample_rate)?;
    Ok(istft(&x, Some(&oracle_mask(clip, frame, sample_rate)?))?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipScores {
    pub noisy: f64,
    pub enhanced: f64,
    pub oracle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean held-out SI-SDR of the enhanced clips.
    pub val_si_sdr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseReport {
    pub history: Vec<DenoiseEpoch>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub held_out: Vec<ClipScores>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl DenoiseReport {
    pub fn mean_noisy(&self) -> f64 {
        mean(self.held_out.iter().map(|c| c.noisy))
    }

    pub fn mean_enhanced(&self) -> f64 {
        mean(self.held_out.iter().map(|c| c.enhanced))
    }

    pub fn mean_oracle(&self) -> f64 {
        mean(self.held_out.iter().map(|c| c.oracle))
    }

    pub fn improvement(&self) -> f64 {
        self.mean_enhanced() - self.mean_noisy()
    }
}

struct Frames {
    x: Tensor,
    mask: Tensor,
    noisy_mag: Tensor,
    clean_mag: Tensor,
}

fn magnitudes(spec: &Spectrogram) -> Result<Tensor> {
    columns(&spec.magnitude())
}

/// Train on 80% of the clips and score the held-out 20%.
pub fn train_denoiser(
    clips: &[DenoiseClip],
    sample_rate: u32,
    cfg: &DenoiseConfig,
) -> Result<(DenoiseModel, DenoiseReport)> {
    if clips.len() < 2 {
        return Err(invalid("train_denoiser", "need at least two clips"));
    }
    let frame = FrameConfig::solve(cfg.window_len, cfg.hop, WindowShape::Hann)?;
    let (train_idx, held_idx) = split_indices(clips.len(), cfg.train.seed);
    let mut raw = Vec::with_capacity(clips.len());
    let mut masks = Vec::with_capacity(clips.len());
    let mut noisy_mag = Vec::with_capacity(clips.len());
    let mut clean_mag = Vec::with_capacity(clips.len());
    for c in clips {
        let x = stft(&c.noisy, &frame, sample_rate)?;
        raw.push(raw_features(&x, cfg.context)?);
        masks.push(columns(&oracle_mask(c, &frame, sample_rate)?)?);
        noisy_mag.push(magnitudes(&x)?);
        clean_mag.push(magnitudes(&stft(&c.clean, &frame, sample_rate)?)?);
    }
    let scaler = Standardizer::fit(train_idx.iter().map(|&i| &raw[i]))?;
    let pool = |idx: &[usize]| -> Result<Frames> {
        let scaled = idx.iter().map(|&i| scaler.apply(&raw[i])).collect::<Result<Vec<_>>>()?;
        let pick = |v: &[Tensor]| hcat(&idx.iter().map(|&i| &v[i]).collect::<Vec<_>>());
        Ok(Frames {
            x: hcat(&scaled.iter().collect::<Vec<_>>())?,
            mask: pick(&masks)?,
            noisy_mag: pick(&noisy_mag)?,
            clean_mag: pick(&clean_mag)?,
        })
    };
    let train = pool(&train_idx)?;
    let held = pool(&held_idx)?;
    let bins = frame.bins();
    let descriptor = format!("{}\ndense out={bins} act=sigmoid", cfg.hidden);
    let mut store = ParamStore::new();
    let mut init = rng::stream(cfg.train.seed, INIT_STREAM);
    let mut net = Network::from_descriptor(&descriptor, train.x.rows(), &mut store, &mut init)?;
    let loss_kind = cfg.loss;
    let frame_loss = |tape: &mut Tape, m: Var, f: &Frames, idx: Option<&[usize]>| -> Result<Var> {
        let sel = |t: &Tensor| idx.map_or_else(|| t.clone(), |i| select_columns(t, i));
        Ok(match loss_kind {
            MaskLoss::BceMask => classification(tape, ClassificationKind::Bce, &sel(&f.mask), m)?,
            MaskLoss::Spectral => spectral_distance(tape, m, &sel(&f.noisy_mag), &sel(&f.clean_mag))?,
        })
    };
    let mut si_history = Vec::new();
    let held_count = held.x.cols() as f64;
    let fit_report = fit(
        &mut net,
        &mut store,
        train.x.cols(),
        &cfg.train,
        |net, tape, p, idx, r| {
            let xv = tape.leaf(select_columns(&train.x, idx))?;
            let m = net.forward(tape, p, xv, Mode::Train, r)?;
            frame_loss(tape, m, &train, Some(idx))
        },
        |net, store| {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape)?;
            let xv = tape.leaf(held.x.clone())?;
            let m = net.forward(&mut tape, &p, xv, Mode::Infer, &mut rng::seeded(0))?;
            let loss = frame_loss(&mut tape, m, &held, None)?;
            let pred = grid(tape.value(m));
            let mut off = 0;
            let mut scores = Vec::with_capacity(held_idx.len());
            for &i in &held_idx {
                let x = stft(&clips[i].noisy, &frame, sample_rate)?;
                let t = x.frame_count();
                let y = istft(&x, Some(&pred[off..off + t]))?;
                off += t;
                scores.push(interior_si_sdr(&frame, &clips[i].clean, &y)?);
            }
            si_history.push(mean(scores.into_iter()));
            Ok(tape.value(loss).item() / held_count)
        },
    )?;
    let history = fit_report
        .history
        .iter()
        .zip(&si_history)
        .map(|(h, &s)| DenoiseEpoch {
            epoch: h.epoch,
            train_loss: h.train_loss,
            val_loss: h.val_loss,
            val_si_sdr: s,
        })
        .collect();
    let mut model = DenoiseModel {
        net,
        store,
        scaler,
        frame: frame.clone(),
        context: cfg.context,
        sample_rate,
    };
    let held_out = held_idx
        .iter()
        .map(|&i| {
            let c = &clips[i];
            Ok(ClipScores {
                noisy: interior_si_sdr(&frame, &c.clean, &c.noisy)?,
                enhanced: interior_si_sdr(&frame, &c.clean, &model.enhance(&c.noisy)?)?,
                oracle: interior_si_sdr(&frame, &c.clean, &oracle_wiener(c, &frame, sample_rate)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        model,
        DenoiseReport {
            history,
            best_epoch: fit_report.best_epoch,
            stopped_early: fit_report.stopped_early,
            held_out,
        },
    ))
}
