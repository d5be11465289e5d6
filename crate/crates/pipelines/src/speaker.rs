//! Speaker embeddings: MFCC frames through a pooled network, trained with
//! the softmax-contrastive loss on same-speaker pairs, then enrolled and
//! identified by cosine scoring.

use rand::Rng;

use acoustic_core::layers::Network;
use acoustic_core::losses::{ntxent, NtXent};
use acoustic_core::{rng, Bound, Mode, ParamStore, Tape, Tensor, Var};
use acoustic_dsp::{mfcc, stft, FrameConfig, MelBank, WindowShape};

use crate::denoise::infer;
use crate::error::{invalid, Result};
use crate::features::{columns, Standardizer};
use crate::synth::{stratified_split, VoiceClip};
use crate::train::{fit, FitReport, TrainConfig, INIT_STREAM};

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerConfig {
    pub window_len: usize,
    pub hop: usize,
    pub mel_bands: usize,
    pub coefficients: usize,
    /// Frame layers, pooling and embedding projection.
    pub descriptor: String,
    pub tau: f64,
    /// One item is one optimizer step over a pair per speaker.
    pub steps_per_epoch: usize,
    pub train: TrainConfig,
    /// Training clips averaged into each enrolled voiceprint.
    pub enroll_clips: usize,
}

impl Default for SpeakerConfig {
    fn default() -> Self {
        Self {
            window_len: 256,
            hop: 128,
            mel_bands: 24,
            coefficients: 20,
            descriptor: "dense out=32 act=tanh\npool kind=stats\ndense out=16 act=identity".into(),
            tau: 0.1,
            steps_per_epoch: 20,
            train: TrainConfig {
                epochs: 30,
                batch: 1,
                lr: 3e-3,
                ..TrainConfig::default()
            },
            enroll_clips: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extractor {
    pub net: Network,
    pub store: ParamStore,
    pub scaler: Standardizer,
    pub frame: FrameConfig,
    pub bank: MelBank,
    pub coefficients: usize,
    pub sample_rate: u32,
}

fn mfcc_frames(audio: &[f64], frame: &FrameConfig, bank: &MelBank, count: usize, rate: u32) -> Result<Tensor> {
    let spec = stft(audio, frame, rate)?;
    columns(&mfcc(bank, &spec.power(), count)?)
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("speaker", "embedding has no direction"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

impl Extractor {
    pub fn features(&self, audio: &[f64]) -> Result<Tensor> {
        self.scaler
            .apply(&mfcc_frames(audio, &self.frame, &self.bank, self.coefficients, self.sample_rate)?)
    }

    /// Unit-norm embedding of one clip.
    pub fn embed(&mut self, audio: &[f64]) -> Result<Vec<f64>> {
        let x = self.features(audio)?;
        let z = infer(&mut self.net, &self.store, &x)?;
        unit(z.data())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerRecord {
    pub id: String,
    /// Unit-norm voiceprint.
    pub embedding: Vec<f64>,
    pub enrolled_clips: usize,
    pub sample_rate: u32,
}

/// Voiceprint from the normalized mean of the clips' embeddings.
pub fn speaker_enroll(extractor: &mut Extractor, id: impl Into<String>, clips: &[&[f64]]) -> Result<SpeakerRecord> {
    let mut sum: Vec<f64> = Vec::new();
    for c in clips {
        let z = extractor.embed(c)?;
        if sum.is_empty() {
            sum = z;
        } else {
            sum.iter_mut().zip(z).for_each(|(a, b)| *a += b);
        }
    }
    if sum.is_empty() {
        return Err(invalid("speaker_enroll", "no enrollment audio"));
    }
    Ok(SpeakerRecord {
        id: id.into(),
        embedding: unit(&sum)?,
        enrolled_clips: clips.len(),
        sample_rate: extractor.sample_rate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Identification {
    /// Registry index of the best match when its score reaches the threshold.
    pub best: Option<usize>,
    /// Largest cosine score; `None` for an empty registry.
    pub score: Option<f64>,
}

/// Cosine scoring of a unit embedding against every record.
pub fn identify_embedding(z: &[f64], registry: &[SpeakerRecord], threshold: f64) -> Identification {
    let top = registry
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.embedding.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()))
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((i, s)),
        });
    Identification {
        best: top.filter(|&(_, s)| s >= threshold).map(|(i, _)| i),
        score: top.map(|(_, s)| s),
    }
}

pub fn speaker_identify(
    extractor: &mut Extractor,
    audio: &[f64],
    registry: &[SpeakerRecord],
    threshold: f64,
) -> Result<Identification> {
    if registry.is_empty() {
        return Ok(Identification { best: None, score: None });
    }
    Ok(identify_embedding(&extractor.embed(audio)?, registry, threshold))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerReport {
    /// Validation loss is the contrastive loss on fixed held-out pairs.
    pub fit: FitReport,
    /// Top-1 accuracy on held-out clips against voiceprints enrolled from
    /// training clips.
    pub accuracy: f64,
    pub registry: Vec<SpeakerRecord>,
}

fn embed_batch(
    net: &mut Network,
    tape: &mut Tape,
    p: &Bound,
    x: &[Tensor],
    idx: &[usize],
    mode: Mode,
    r: &mut dyn rand::RngCore,
) -> Result<Var> {
    let cols = idx
        .iter()
        .map(|&i| {
            let xv = tape.leaf(x[i].clone())?;
            Ok(net.forward(tape, p, xv, mode, r)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tape.concat(&cols, 1)?)
}

pub fn train_speaker(
    clips: &[VoiceClip],
    speakers: usize,
    sample_rate: u32,
    cfg: &SpeakerConfig,
) -> Result<(Extractor, SpeakerReport)> {
    let frame = FrameConfig::solve(cfg.window_len, cfg.hop, WindowShape::Hann)?;
    let bank = MelBank::new(cfg.mel_bands, frame.bins(), sample_rate)?;
    let labels: Vec<usize> = clips.iter().map(|c| c.speaker).collect();
    let (train_idx, held_idx) = stratified_split(&labels, cfg.train.seed);
    let by_speaker = |idx: &[usize]| -> Vec<Vec<usize>> {
        (0..speakers)
            .map(|s| idx.iter().copied().filter(|&i| clips[i].speaker == s).collect())
            .collect()
    };
    let train_sets = by_speaker(&train_idx);
    let held_sets = by_speaker(&held_idx);
    if speakers < 2 || train_sets.iter().any(|s| s.len() < 2.max(cfg.enroll_clips)) || held_sets.iter().any(|s| s.len() < 2) {
        return Err(invalid("train_speaker", "every speaker needs enough training and held-out clips"));
    }
    let raw = clips
        .iter()
        .map(|c| mfcc_frames(&c.audio, &frame, &bank, cfg.coefficients, sample_rate))
        .collect::<Result<Vec<_>>>()?;
    let scaler = Standardizer::fit(train_idx.iter().map(|&i| &raw[i]))?;
    let x = raw.iter().map(|t| scaler.apply(t)).collect::<Result<Vec<_>>>()?;
    let mut store = ParamStore::new();
    let mut init = rng::stream(cfg.train.seed, INIT_STREAM);
    let mut net = Network::from_descriptor(&cfg.descriptor, cfg.coefficients, &mut store, &mut init)?;
    let loss_cfg = NtXent {
        scale: 1.0,
        tau: cfg.tau,
        margin: 0.0,
    };
    let val_a: Vec<usize> = held_sets.iter().map(|s| s[0]).collect();
    let val_b: Vec<usize> = held_sets.iter().map(|s| s[1]).collect();
    let fit_report = fit(
        &mut net,
        &mut store,
        cfg.steps_per_epoch,
        &cfg.train,
        |net, tape, p, _, r| {
            let mut a = Vec::with_capacity(speakers);
            let mut b = Vec::with_capacity(speakers);
            for set in &train_sets {
                let i = r.random_range(0..set.len());
                let j = (i + r.random_range(1..set.len())) % set.len();
                a.push(set[i]);
                b.push(set[j]);
            }
            let za = embed_batch(net, tape, p, &x, &a, Mode::Train, r)?;
            let zb = embed_batch(net, tape, p, &x, &b, Mode::Train, r)?;
            Ok(ntxent(tape, za, zb, loss_cfg)?)
        },
        |net, store| {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape)?;
            let r = &mut rng::seeded(0);
            let za = embed_batch(net, &mut tape, &p, &x, &val_a, Mode::Infer, r)?;
            let zb = embed_batch(net, &mut tape, &p, &x, &val_b, Mode::Infer, r)?;
            let l = ntxent(&mut tape, za, zb, loss_cfg)?;
            Ok(tape.value(l).item())
        },
    )?;
    let mut extractor = Extractor {
        net,
        store,
        scaler,
        frame,
        bank,
        coefficients: cfg.coefficients,
        sample_rate,
    };
    let registry = train_sets
        .iter()
        .enumerate()
        .map(|(s, set)| {
            let audio: Vec<&[f64]> = set[..cfg.enroll_clips].iter().map(|&i| clips[i].audio.as_slice()).collect();
            speaker_enroll(&mut extractor, format!("speaker{s}"), &audio)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut correct = 0;
    for &i in &held_idx {
        let id = speaker_identify(&mut extractor, &clips[i].audio, &registry, -1.0)?;
        correct += usize::from(id.best == Some(clips[i].speaker));
    }
    Ok((
        extractor,
        SpeakerReport {
            fit: fit_report,
            accuracy: correct as f64 / held_idx.len() as f64,
            registry,
        },
    ))
}
