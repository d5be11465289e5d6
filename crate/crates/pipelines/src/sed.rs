//! Weakly labelled event detection: a per-frame network whose outputs are
//! pooled into clip probabilities and trained on clip labels only.

use acoustic_core::layers::Network;
use acoustic_core::losses::{classification, ClassificationKind, EPS_NUM};
use acoustic_core::{rng, Bound, Mode, ParamStore, Tape, Tensor, Var};
use acoustic_detect::{aggregate, auc_exact, decide, Aggregation, ScoredSet, Thresholds, TiePolicy};
use acoustic_dsp::mel::log_mel;
use acoustic_dsp::{stft, FrameConfig, MelBank, WindowShape};

use crate::denoise::infer;
use crate::error::{invalid, Result};
use crate::features::{columns, stack_context, Standardizer};
use crate::synth::{split_indices, EventClip, SED_CLASSES};
use crate::train::{fit, FitReport, TrainConfig, INIT_STREAM};

#[derive(Clone, Debug, PartialEq)]
pub struct SedConfig {
    pub window_len: usize,
    pub hop: usize,
    pub mel_bands: usize,
    pub context: usize,
    /// Hidden layers; a sigmoid layer with one output per class is appended.
    pub hidden: String,
    pub aggregation: Aggregation,
    pub loss: ClassificationKind,
    /// `batch` counts clips.
    pub train: TrainConfig,
}

impl Default for SedConfig {
    fn default() -> Self {
        Self {
            window_len: 256,
            hop: 128,
            mel_bands: 24,
            context: 1,
            hidden: "dense out=32 act=relu\ndense out=32 act=relu".into(),
            aggregation: Aggregation::LinearSoftmax,
            loss: ClassificationKind::Bce,
            train: TrainConfig {
                epochs: 60,
                batch: 8,
                lr: 3e-3,
                ..TrainConfig::default()
            },
        }
    }
}

/// Differentiable clip pooling of `[C, T]` frame probabilities into `[C, 1]`.
pub fn aggregate_on_tape(tape: &mut Tape, frames: Var, method: Aggregation) -> Result<Var> {
    Ok(match method {
        Aggregation::Max => tape.max_axis(frames, 1)?,
        Aggregation::Mean => tape.mean_axis(frames, 1)?,
        Aggregation::LinearSoftmax => {
            let sq = tape.square(frames)?;
            let num = tape.sum_axis(sq, 1)?;
            let den = tape.sum_axis(frames, 1)?;
            let den = tape.add_scalar(den, EPS_NUM)?;
            tape.div(num, den)?
        }
        Aggregation::SoftmaxWeighted(tau) => {
            let z = tape.scale(frames, tau)?;
            let w = tape.softmax(z, 1)?;
            let wy = tape.mul(w, frames)?;
            tape.sum_axis(wy, 1)?
        }
        other => return Err(invalid("sed", format!("{other:?} has no differentiable form here"))),
    })
}

#[derive(Clone, Debug)]
pub struct SedModel {
    pub net: Network,
    pub store: ParamStore,
    pub scaler: Standardizer,
    pub frame: FrameConfig,
    pub bank: MelBank,
    pub context: usize,
    pub aggregation: Aggregation,
    pub sample_rate: u32,
}

fn raw_features(audio: &[f64], frame: &FrameConfig, bank: &MelBank, context: usize, rate: u32) -> Result<Tensor> {
    let spec = stft(audio, frame, rate)?;
    columns(&stack_context(&log_mel(bank, &spec.power())?, context))
}

impl SedModel {
    /// Frame probabilities `[C][T]`.
    pub fn frame_probs(&mut self, audio: &[f64]) -> Result<Vec<Vec<f64>>> {
        let x = raw_features(audio, &self.frame, &self.bank, self.context, self.sample_rate)?;
        let y = infer(&mut self.net, &self.store, &self.scaler.apply(&x)?)?;
        Ok((0..y.rows()).map(|c| y.row(c).to_vec()).collect())
    }

    pub fn clip_probs(&mut self, audio: &[f64]) -> Result<Vec<f64>> {
        let method = self.aggregation;
        self.frame_probs(audio)?
            .iter()
            .map(|row| Ok(aggregate(row, method)?))
            .collect()
    }

    /// Frame decisions `[C][T]` from the three-threshold rule.
    pub fn detect(&mut self, audio: &[f64], th: &Thresholds) -> Result<Vec<Vec<bool>>> {
        let method = self.aggregation;
        self.frame_probs(audio)?
            .iter()
            .map(|row| Ok(decide(row, th, aggregate(row, method)?)?))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SedReport {
    /// Validation loss is the mean held-out clip loss.
    pub fit: FitReport,
    /// Pooled over classes and held-out frames.
    pub frame_auc: f64,
    pub class_auc: Vec<f64>,
}

/// Frame-level AUC per class and pooled, against hidden frame truth.
pub fn frame_auc(model: &mut SedModel, clips: &[&EventClip]) -> Result<(f64, Vec<f64>)> {
    let mut per_class: Vec<Vec<(f64, bool)>> = vec![Vec::new(); SED_CLASSES];
    for c in clips {
        let probs = model.frame_probs(&c.audio)?;
        let truth = c.frame_roll(&model.frame)?;
        for (k, (p, t)) in probs.iter().zip(&truth).enumerate() {
            per_class[k].extend(p.iter().copied().zip(t.iter().copied()));
        }
    }
    let auc = |items: Vec<(f64, bool)>| -> Result<f64> {
        Ok(auc_exact(&ScoredSet::from_labeled(items)?, TiePolicy::Half))
    };
    let pooled = auc(per_class.iter().flatten().copied().collect())?;
    let class = per_class.into_iter().map(auc).collect::<Result<Vec<_>>>()?;
    Ok((pooled, class))
}

fn clip_loss(
    net: &mut Network,
    tape: &mut Tape,
    p: &Bound,
    x: &Tensor,
    labels: &Tensor,
    cfg: &SedConfig,
    mode: Mode,
    r: &mut dyn rand::RngCore,
) -> Result<Var> {
    let xv = tape.leaf(x.clone())?;
    let y = net.forward(tape, p, xv, mode, r)?;
    let clip = aggregate_on_tape(tape, y, cfg.aggregation)?;
    Ok(classification(tape, cfg.loss, labels, clip)?)
}

pub fn train_sed(clips: &[EventClip], sample_rate: u32, cfg: &SedConfig) -> Result<(SedModel, SedReport)> {
    if clips.len() < 2 {
        return Err(invalid("train_sed", "need at least two clips"));
    }
    let frame = FrameConfig::solve(cfg.window_len, cfg.hop, WindowShape::Hann)?;
    let bank = MelBank::new(cfg.mel_bands, frame.bins(), sample_rate)?;
    let (train_idx, held_idx) = split_indices(clips.len(), cfg.train.seed);
    let raw = clips
        .iter()
        .map(|c| raw_features(&c.audio, &frame, &bank, cfg.context, sample_rate))
        .collect::<Result<Vec<_>>>()?;
    let labels = clips
        .iter()
        .map(|c| {
            let l = c.clip_labels(&frame)?;
            Ok(Tensor::matrix(SED_CLASSES, 1, l.iter().map(|&v| f64::from(u8::from(v))).collect())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let scaler = Standardizer::fit(train_idx.iter().map(|&i| &raw[i]))?;
    let x = raw.iter().map(|t| scaler.apply(t)).collect::<Result<Vec<_>>>()?;
    let descriptor = format!("{}\ndense out={SED_CLASSES} act=sigmoid", cfg.hidden);
    let mut store = ParamStore::new();
    let mut init = rng::stream(cfg.train.seed, INIT_STREAM);
    let mut net = Network::from_descriptor(&descriptor, x[0].rows(), &mut store, &mut init)?;
    let fit_report = fit(
        &mut net,
        &mut store,
        train_idx.len(),
        &cfg.train,
        |net, tape, p, batch, r| {
            let mut total: Option<Var> = None;
            for &b in batch {
                let i = train_idx[b];
                let l = clip_loss(net, tape, p, &x[i], &labels[i], cfg, Mode::Train, r)?;
                total = Some(match total {
                    Some(t) => tape.add(t, l)?,
                    None => l,
                });
            }
            total.ok_or_else(|| invalid("sed", "empty batch"))
        },
        |net, store| {
            let mut sum = 0.0;
            for &i in &held_idx {
                let mut tape = Tape::new();
                let p = store.bind(&mut tape)?;
                let l = clip_loss(net, &mut tape, &p, &x[i], &labels[i], cfg, Mode::Infer, &mut rng::seeded(0))?;
                sum += tape.value(l).item();
            }
            Ok(sum / held_idx.len() as f64)
        },
    )?;
    let mut model = SedModel {
        net,
        store,
        scaler,
        frame,
        bank,
        context: cfg.context,
        aggregation: cfg.aggregation,
        sample_rate,
    };
    let held: Vec<&EventClip> = held_idx.iter().map(|&i| &clips[i]).collect();
    let (pooled, class_auc) = frame_auc(&mut model, &held)?;
    Ok((
        model,
        SedReport {
            fit: fit_report,
            frame_auc: pooled,
            class_auc,
        },
    ))
}

/// Mean frame probability over every class and frame of `clips`.
pub fn mean_frame_prob(model: &mut SedModel, clips: &[EventClip]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in clips {
        for row in model.frame_probs(&c.audio)? {
            sum += row.iter().sum::<f64>();
            n += row.len();
        }
    }
    Ok(sum / n as f64)
}
