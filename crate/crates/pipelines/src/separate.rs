//! Mask-estimation separator trained with the utterance-level
//! permutation-invariant spectral loss.

use acoustic_core::layers::Network;
use acoustic_core::losses::{pit, pit_select, si_sdr_value, spectral_distance};
use acoustic_core::{rng, Mode, ParamStore, Tape, Tensor, Var};
use acoustic_dsp::{ideal_masks, istft, stft, FrameConfig, Spectrogram, WindowShape};

use crate::denoise::infer;
use crate::error::{invalid, Result};
use crate::features::{columns, grid, log_power, Standardizer};
use crate::synth::{split_indices, MixtureClip};
use crate::train::{fit, FitReport, TrainConfig, INIT_STREAM};

#[derive(Clone, Debug, PartialEq)]
pub struct SeparateConfig {
    pub window_len: usize,
    pub hop: usize,
    /// Hidden layers; a sigmoid layer with `J K` outputs is appended.
    pub hidden: String,
    /// `batch` counts clips.
    pub train: TrainConfig,
}

impl Default for SeparateConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            hidden: "dense out=128 act=relu\ndense out=128 act=relu".into(),
            train: TrainConfig {
                epochs: 40,
                batch: 4,
                lr: 2e-3,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeparatorModel {
    pub net: Network,
    pub store: ParamStore,
    pub scaler: Standardizer,
    pub frame: FrameConfig,
    pub sources: usize,
    pub sample_rate: u32,
}

fn raw_features(spec: &Spectrogram) -> Result<Tensor> {
    columns(&log_power(&spec.power()))
}

impl SeparatorModel {
    /// Mixture spectrum and one `[T][K]` mask per output.
    pub fn masks(&mut self, mixture: &[f64]) -> Result<(Spectrogram, Vec<Vec<Vec<f64>>>)> {
        let spec = stft(mixture, &self.frame, self.sample_rate)?;
        let x = self.scaler.apply(&raw_features(&spec)?)?;
        let y = infer(&mut self.net, &self.store, &x)?;
        let k = self.frame.bins();
        let t = y.cols();
        let masks = (0..self.sources)
            .map(|j| {
                let rows = y.data()[j * k * t..(j + 1) * k * t].to_vec();
                Ok(grid(&Tensor::matrix(k, t, rows)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((spec, masks))
    }

    pub fn separate(&mut self, mixture: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (spec, masks) = self.masks(mixture)?;
        masks
            .iter()
            .map(|m| Ok(istft(&spec, Some(m))?))
            .collect()
    }
}

/// SI-SDR of every stem against its best-matching estimate, in stem order,
/// with the estimate index chosen for each stem.
pub fn matched_si_sdr(frame: &FrameConfig, stems: &[Vec<f64>], estimates: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<usize>)> {
    if stems.len() != estimates.len() {
        return Err(invalid("separate", "one estimate per stem required"));
    }
    let frames = frame.frame_count(stems[0].len())?;
    let r = frame.interior(frames);
    let scores = estimates
        .iter()
        .map(|e| {
            stems
                .iter()
                .map(|s| si_sdr_value(&s[r.clone()], &e[r.clone()]))
                .collect::<acoustic_core::Result<Vec<_>>>()
        })
        .collect::<acoustic_core::Result<Vec<_>>>()?;
    let cost: Vec<Vec<f64>> = scores.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
    let (_, perm) = pit(&cost)?;
    let mut per_stem = vec![0.0; stems.len()];
    let mut chosen = vec![0; stems.len()];
    for (i, &j) in perm.iter().enumerate() {
        per_stem[j] = scores[i][j];
        chosen[j] = i;
    }
    Ok((per_stem, chosen))
}

/// Stems recovered with ideal ratio masks from their true powers.
pub fn oracle_separation(clip: &MixtureClip, frame: &FrameConfig, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let x = stft(&clip.mixture, frame, sample_rate)?;
    let powers = clip
        .stems
        .iter()
        .map(|s| Ok(stft(s, frame, sample_rate)?.power()))
        .collect::<Result<Vec<_>>>()?;
    ideal_masks(&powers, 0.0)?
        .iter()
        .map(|m| Ok(istft(&x, Some(m))?))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationScores {
    /// SI-SDR per stem, in the clip's stem order.
    pub si_sdr: Vec<f64>,
    pub oracle: Vec<f64>,
    /// Comb index of each stem.
    pub combs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparateReport {
    /// Validation loss is the mean held-out PIT loss per clip.
    pub fit: FitReport,
    pub held_out: Vec<SeparationScores>,
}

impl SeparateReport {
    /// Mean SI-SDR of each comb over held-out clips.
    pub fn per_source_mean(&self) -> Vec<f64> {
        let j = self.held_out.first().map_or(0, |c| c.combs.len());
        let mut sum = vec![0.0; j];
        let mut n = vec![0usize; j];
        for c in &self.held_out {
            for (s, &comb) in c.si_sdr.iter().zip(&c.combs) {
                sum[comb] += s;
                n[comb] += 1;
            }
        }
        sum.iter().zip(n).map(|(s, n)| s / n as f64).collect()
    }

    pub fn worst_clip_source(&self) -> f64 {
        self.held_out
            .iter()
            .flat_map(|c| c.si_sdr.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_pit_loss(&self) -> f64 {
        self.fit.best_val()
    }
}

/// The same clips with every stem list reversed.
pub fn swap_stems(clips: &[MixtureClip]) -> Vec<MixtureClip> {
    clips
        .iter()
        .map(|c| MixtureClip {
            mixture: c.mixture.clone(),
            stems: c.stems.iter().rev().cloned().collect(),
            combs: c.combs.iter().rev().copied().collect(),
        })
        .collect()
}

struct Prepared {
    x: Vec<Tensor>,
    mix_mag: Vec<Tensor>,
    stem_mag: Vec<Vec<Tensor>>,
}

/// Sum over clips `idx` of the per-clip PIT spectral loss.
fn pit_loss(
    net: &mut Network,
    tape: &mut Tape,
    p: &acoustic_core::Bound,
    data: &Prepared,
    idx: &[usize],
    sources: usize,
    mode: Mode,
    r: &mut dyn rand::RngCore,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for &i in idx {
        let xv = tape.leaf(data.x[i].clone())?;
        let y = net.forward(tape, p, xv, mode, r)?;
        let k = data.mix_mag[i].rows();
        let masks = (0..sources)
            .map(|j| tape.slice(y, 0, j * k, k))
            .collect::<acoustic_core::Result<Vec<_>>>()?;
        let costs = masks
            .iter()
            .map(|&m| {
                data.stem_mag[i]
                    .iter()
                    .map(|s| spectral_distance(tape, m, &data.mix_mag[i], s))
                    .collect::<acoustic_core::Result<Vec<_>>>()
            })
            .collect::<acoustic_core::Result<Vec<_>>>()?;
        let (l, _) = pit_select(tape, &costs)?;
        total = Some(match total {
            Some(t) => tape.add(t, l)?,
            None => l,
        });
    }
    total.ok_or_else(|| invalid("separate", "empty batch"))
}

pub fn train_separator(
    clips: &[MixtureClip],
    sample_rate: u32,
    cfg: &SeparateConfig,
) -> Result<(SeparatorModel, SeparateReport)> {
    let sources = clips.first().map_or(0, |c| c.stems.len());
    if clips.len() < 2 || !(2..=3).contains(&sources) || clips.iter().any(|c| c.stems.len() != sources) {
        return Err(invalid("train_separator", "need two or more clips of 2 or 3 stems"));
    }
    let frame = FrameConfig::solve(cfg.window_len, cfg.hop, WindowShape::Hann)?;
    let (train_idx, held_idx) = split_indices(clips.len(), cfg.train.seed);
    let mut raw = Vec::with_capacity(clips.len());
    let mut mix_mag = Vec::with_capacity(clips.len());
    let mut stem_mag = Vec::with_capacity(clips.len());
    for c in clips {
        let x = stft(&c.mixture, &frame, sample_rate)?;
        raw.push(raw_features(&x)?);
        mix_mag.push(columns(&x.magnitude())?);
        stem_mag.push(
            c.stems
                .iter()
                .map(|s| columns(&stft(s, &frame, sample_rate)?.magnitude()))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let scaler = Standardizer::fit(train_idx.iter().map(|&i| &raw[i]))?;
    let data = Prepared {
        x: raw.iter().map(|t| scaler.apply(t)).collect::<Result<Vec<_>>>()?,
        mix_mag,
        stem_mag,
    };
    let bins = frame.bins();
    let descriptor = format!("{}\ndense out={} act=sigmoid", cfg.hidden, sources * bins);
    let mut store = ParamStore::new();
    let mut init = rng::stream(cfg.train.seed, INIT_STREAM);
    let mut net = Network::from_descriptor(&descriptor, bins, &mut store, &mut init)?;
    let fit_report = fit(
        &mut net,
        &mut store,
        train_idx.len(),
        &cfg.train,
        |net, tape, p, batch, r| {
            let idx: Vec<usize> = batch.iter().map(|&b| train_idx[b]).collect();
            pit_loss(net, tape, p, &data, &idx, sources, Mode::Train, r)
        },
        |net, store| {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape)?;
            let l = pit_loss(net, &mut tape, &p, &data, &held_idx, sources, Mode::Infer, &mut rng::seeded(0))?;
            Ok(tape.value(l).item() / held_idx.len() as f64)
        },
    )?;
    let mut model = SeparatorModel {
        net,
        store,
        scaler,
        frame: frame.clone(),
        sources,
        sample_rate,
    };
    let held_out = held_idx
        .iter()
        .map(|&i| {
            let c = &clips[i];
            let (si_sdr, _) = matched_si_sdr(&frame, &c.stems, &model.separate(&c.mixture)?)?;
            let (oracle, _) = matched_si_sdr(&frame, &c.stems, &oracle_separation(c, &frame, sample_rate)?)?;
            Ok(SeparationScores {
                si_sdr,
                oracle,
                combs: c.combs.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        model,
        SeparateReport {
            fit: fit_report,
            held_out,
        },
    ))
}
