//! Seeded synthetic datasets with exact ground truth.
//!
//! Clip `i` draws every random quantity from stream `i + 1` of the spec's
//! seed, so a dataset is a pure function of its spec and growing `clips`
//! keeps the earlier clips unchanged.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use acoustic_core::rng::{self, normal};
use acoustic_dsp::spatial::{simulate_scene, ArrayGeometry, ArrayScene, Direction, SceneObservation, SceneSource};
use acoustic_dsp::{FrameConfig, WindowShape};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Denoise,
    Separate,
    Sed,
    Speaker,
    Doa,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "denoise" => Self::Denoise,
            "separate" => Self::Separate,
            "sed" => Self::Sed,
            "speaker" => Self::Speaker,
            "doa" => Self::Doa,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub task: TaskKind,
    pub sample_rate: u32,
    /// Clip length in seconds.
    pub duration: f64,
    /// Signal-to-noise ratio; `f64::INFINITY` adds no noise.
    pub snr_db: f64,
    /// Stems per mixture, speakers, or sources per scene.
    pub sources: usize,
    /// Expected events per second and class.
    pub event_density: f64,
    pub clips: usize,
    pub seed: u64,
}

/// Tone frequency of the denoising task.
pub const TONE_HZ: f64 = 1000.0;
/// Base spacing of the separation combs.
pub const COMB_HZ: f64 = 125.0;
pub const SED_CLASSES: usize = 2;
/// Centre frequencies of the short and the long event class.
pub const SED_TONES: [f64; SED_CLASSES] = [1500.0, 500.0];
pub const MAX_SPEAKERS: usize = 8;
/// Smallest azimuth gap between sources of one scene.
pub const MIN_SOURCE_GAP: f64 = PI / 6.0;

impl SynthSpec {
    /// Desk-scale defaults for each task.
    pub fn for_task(task: TaskKind, seed: u64) -> Self {
        let base = Self {
            task,
            sample_rate: 8000,
            duration: 1.0,
            snr_db: f64::INFINITY,
            sources: 1,
            event_density: 0.0,
            clips: 60,
            seed,
        };
        match task {
            TaskKind::Denoise => Self { snr_db: 0.0, ..base },
            TaskKind::Separate => Self { sources: 2, ..base },
            TaskKind::Sed => Self {
                duration: 2.0,
                snr_db: 20.0,
                event_density: 0.5,
                clips: 200,
                ..base
            },
            TaskKind::Speaker => Self {
                duration: 0.5,
                snr_db: 20.0,
                sources: 5,
                clips: 100,
                ..base
            },
            TaskKind::Doa => Self {
                sample_rate: 16000,
                duration: 0.25,
                snr_db: 20.0,
                clips: 100,
                ..base
            },
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration * f64::from(self.sample_rate)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(invalid("synth", "sample rate and duration must be positive"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(invalid("synth", "SNR must be a number or +inf"));
        }
        if self.clips == 0 {
            return Err(invalid("synth", "at least one clip required"));
        }
        if !(self.event_density >= 0.0) || !self.event_density.is_finite() {
            return Err(invalid("synth", "event density must be nonnegative"));
        }
        let s = self.sources;
        let ok = match self.task {
            TaskKind::Denoise | TaskKind::Sed => true,
            TaskKind::Separate => (2..=3).contains(&s),
            TaskKind::Speaker => (1..=MAX_SPEAKERS).contains(&s),
            TaskKind::Doa => (1..=4).contains(&s),
        };
        if !ok {
            return Err(invalid("synth", format!("{s} sources unsupported for {:?}", self.task)));
        }
        if self.samples() < 512 {
            return Err(invalid("synth", "clips shorter than 512 samples"));
        }
        Ok(())
    }

    fn clip_rng(&self, i: usize) -> rng::Rng {
        rng::stream(self.seed, i as u64 + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseClip {
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    pub noisy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureClip {
    pub mixture: Vec<f64>,
    pub stems: Vec<Vec<f64>>,
    /// Comb index of each stem.
    pub combs: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub class: usize,
    /// Sample range `[start, end)`.
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventClip {
    pub audio: Vec<f64>,
    pub events: Vec<Event>,
}

impl EventClip {
    /// Frame truth `[C][T]`: a frame is active when its centre sample lies
    /// inside an event.
    pub fn frame_roll(&self, config: &FrameConfig) -> Result<Vec<Vec<bool>>> {
        let t_count = config.frame_count(self.audio.len())?;
        let mut roll = vec![vec![false; t_count]; SED_CLASSES];
        for e in &self.events {
            for (t, v) in roll[e.class].iter_mut().enumerate() {
                let centre = t * config.hop() + config.window_len() / 2;
                *v |= (e.start..e.end).contains(&centre);
            }
        }
        Ok(roll)
    }

    /// Weak labels: a class is present when any of its frames is active.
    pub fn clip_labels(&self, config: &FrameConfig) -> Result<Vec<bool>> {
        Ok(self.frame_roll(config)?.iter().map(|r| r.iter().any(|&v| v)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoiceClip {
    pub speaker: usize,
    pub audio: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DoaScene {
    pub observation: SceneObservation,
    pub azimuths: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DoaSet {
    pub geometry: ArrayGeometry,
    pub config: FrameConfig,
    pub scenes: Vec<DoaScene>,
}

#[derive(Clone, Debug)]
pub enum Dataset {
    Denoise(Vec<DenoiseClip>),
    Separate(Vec<MixtureClip>),
    Sed(Vec<EventClip>),
    Speaker(Vec<VoiceClip>),
    Doa(DoaSet),
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    Ok(match spec.task {
        TaskKind::Denoise => Dataset::Denoise(denoise_clips(spec)?),
        TaskKind::Separate => Dataset::Separate(mixture_clips(spec)?),
        TaskKind::Sed => Dataset::Sed(event_clips(spec)?),
        TaskKind::Speaker => Dataset::Speaker(voice_clips(spec)?),
        TaskKind::Doa => Dataset::Doa(doa_scenes(spec)?),
    })
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Measured SNR in dB of `signal` against `noise`.
pub fn measured_snr(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

/// White noise scaled to sit exactly `snr_db` below `reference`.
fn white_noise_at<R: Rng + ?Sized>(reference: &[f64], snr_db: f64, rng: &mut R) -> Vec<f64> {
    if snr_db == f64::INFINITY {
        return vec![0.0; reference.len()];
    }
    let raw: Vec<f64> = (0..reference.len()).map(|_| normal(rng)).collect();
    let gain = (power(reference) / (power(&raw) * 10f64.powf(snr_db / 10.0))).sqrt();
    raw.into_iter().map(|v| v * gain).collect()
}

fn floor_noise<R: Rng + ?Sized>(n: usize, snr_db: f64, rng: &mut R) -> Vec<f64> {
    if snr_db == f64::INFINITY {
        return vec![0.0; n];
    }
    // Relative to a unit-amplitude sinusoid.
    let std = (0.5 / 10f64.powf(snr_db / 10.0)).sqrt();
    (0..n).map(|_| std * normal(rng)).collect()
}

/// Slow amplitude modulation `1 + depth sin(2 pi rate t + phase)`.
fn modulation<R: Rng + ?Sized>(n: usize, rate: u32, depth: f64, rng: &mut R) -> Vec<f64> {
    let hz = rng.random_range(2.0..6.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    (0..n)
        .map(|i| 1.0 + depth * (2.0 * PI * hz * i as f64 / f64::from(rate) + phase).sin())
        .collect()
}

fn denoise_clips(spec: &SynthSpec) -> Result<Vec<DenoiseClip>> {
    spec.validate()?;
    let n = spec.samples();
    let rate = f64::from(spec.sample_rate);
    Ok((0..spec.clips)
        .map(|i| {
            let mut r = spec.clip_rng(i);
            let amp = r.random_range(0.5..1.0);
            let phase = r.random_range(0.0..2.0 * PI);
            let env = modulation(n, spec.sample_rate, 0.5, &mut r);
            let clean: Vec<f64> = env
                .iter()
                .enumerate()
                .map(|(k, e)| amp * e * (2.0 * PI * TONE_HZ * k as f64 / rate + phase).sin())
                .collect();
            let noise = white_noise_at(&clean, spec.snr_db, &mut r);
            let noisy = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
            DenoiseClip { clean, noise, noisy }
        })
        .collect())
}

/// Frequencies of comb `j` out of `count`: `COMB_HZ (count h + j + count)`.
pub fn comb_frequencies(j: usize, count: usize, sample_rate: u32) -> Vec<f64> {
    let top = 0.45 * f64::from(sample_rate);
    (0..)
        .map(|h| COMB_HZ * (count * h + j + count) as f64)
        .take_while(|&f| f < top)
        .collect()
}

fn mixture_clips(spec: &SynthSpec) -> Result<Vec<MixtureClip>> {
    spec.validate()?;
    let n = spec.samples();
    let rate = f64::from(spec.sample_rate);
    let count = spec.sources;
    Ok((0..spec.clips)
        .map(|i| {
            let mut r = spec.clip_rng(i);
            let sources: Vec<Vec<f64>> = (0..count)
                .map(|j| {
                    let freqs = comb_frequencies(j, count, spec.sample_rate);
                    let scale = 1.0 / (freqs.len() as f64).sqrt();
                    let env = modulation(n, spec.sample_rate, 0.5, &mut r);
                    let mut s = vec![0.0; n];
                    for f in freqs {
                        let a = scale * r.random_range(0.3..1.0);
                        let ph = r.random_range(0.0..2.0 * PI);
                        for (k, v) in s.iter_mut().enumerate() {
                            *v += a * (2.0 * PI * f * k as f64 / rate + ph).sin();
                        }
                    }
                    s.iter_mut().zip(&env).for_each(|(v, e)| *v *= e);
                    s
                })
                .collect();
            let mut combs: Vec<usize> = (0..count).collect();
            for k in (1..count).rev() {
                combs.swap(k, r.random_range(0..=k));
            }
            let stems: Vec<Vec<f64>> = combs.iter().map(|&c| sources[c].clone()).collect();
            let mut mixture = vec![0.0; n];
            for s in &stems {
                mixture.iter_mut().zip(s).for_each(|(m, v)| *m += v);
            }
            let noise = white_noise_at(&mixture, spec.snr_db, &mut r);
            mixture.iter_mut().zip(&noise).for_each(|(m, v)| *m += v);
            MixtureClip { mixture, stems, combs }
        })
        .collect())
}

/// Short bursts and long tones, in seconds.
fn event_length<R: Rng + ?Sized>(class: usize, rng: &mut R) -> f64 {
    match class {
        0 => rng.random_range(0.04..0.1),
        _ => rng.random_range(0.3..0.7),
    }
}

fn event_clips(spec: &SynthSpec) -> Result<Vec<EventClip>> {
    spec.validate()?;
    let n = spec.samples();
    let rate = f64::from(spec.sample_rate);
    let expected = spec.event_density * spec.duration;
    let poisson = if expected > 0.0 {
        Some(Poisson::new(expected).map_err(|e| invalid("synth", e.to_string()))?)
    } else {
        None
    };
    let ramp = (0.005 * rate).round().max(1.0);
    Ok((0..spec.clips)
        .map(|i| {
            let mut r = spec.clip_rng(i);
            let mut audio = floor_noise(n, spec.snr_db, &mut r);
            let mut events = Vec::new();
            for class in 0..SED_CLASSES {
                let count = poisson.as_ref().map_or(0, |p| p.sample(&mut r) as usize);
                for _ in 0..count {
                    let len = ((event_length(class, &mut r) * rate).round() as usize).min(n);
                    let start = r.random_range(0..=n - len);
                    let amp = r.random_range(0.3..1.0);
                    let ph = r.random_range(0.0..2.0 * PI);
                    for k in 0..len {
                        let edge = (k.min(len - 1 - k) as f64 / ramp).min(1.0);
                        let t = (start + k) as f64 / rate;
                        audio[start + k] += amp * edge * (2.0 * PI * SED_TONES[class] * t + ph).sin();
                    }
                    events.push(Event {
                        class,
                        start,
                        end: start + len,
                    });
                }
            }
            EventClip { audio, events }
        })
        .collect())
}

/// Pitch and two resonance centres of speaker `s`.
pub fn speaker_template(s: usize) -> (f64, [f64; 2]) {
    let f0 = 95.0 * 1.28f64.powi(s as i32);
    (f0, [350.0 + 110.0 * s as f64, 2300.0 - 220.0 * s as f64])
}

fn voice<R: Rng + ?Sized>(speaker: usize, n: usize, rate: u32, snr_db: f64, rng: &mut R) -> Vec<f64> {
    let fs = f64::from(rate);
    let (f0, [f1, f2]) = speaker_template(speaker);
    let f0 = f0 * (1.0 + rng.random_range(-0.03..0.03));
    let vib_hz = rng.random_range(4.0..6.0);
    let vib_ph = rng.random_range(0.0..2.0 * PI);
    let env = modulation(n, rate, 0.6, rng);
    let top = 0.45 * fs;
    // Running phase of the fundamental under 1% vibrato.
    let mut base = Vec::with_capacity(n);
    let mut acc = 0.0;
    for k in 0..n {
        base.push(acc);
        let f = f0 * (1.0 + 0.01 * (2.0 * PI * vib_hz * k as f64 / fs + vib_ph).sin());
        acc += 2.0 * PI * f / fs;
    }
    let mut out = vec![0.0; n];
    let mut h = 1;
    while f0 * h as f64 * 1.01 < top {
        let f = f0 * h as f64;
        let gain = (-((f - f1) / 250.0).powi(2)).exp() + 0.6 * (-((f - f2) / 350.0).powi(2)).exp() + 0.05;
        let ph = rng.random_range(0.0..2.0 * PI);
        for (v, b) in out.iter_mut().zip(&base) {
            *v += gain * (h as f64 * b + ph).sin();
        }
        h += 1;
    }
    out.iter_mut().zip(&env).for_each(|(v, e)| *v *= e);
    let noise = white_noise_at(&out, snr_db, rng);
    out.iter().zip(noise).map(|(a, b)| a + b).collect()
}

fn voice_clips(spec: &SynthSpec) -> Result<Vec<VoiceClip>> {
    spec.validate()?;
    let n = spec.samples();
    Ok((0..spec.clips)
        .map(|i| {
            let speaker = i % spec.sources;
            let audio = voice(speaker, n, spec.sample_rate, spec.snr_db, &mut spec.clip_rng(i));
            VoiceClip { speaker, audio }
        })
        .collect())
}

/// A fresh clip of `speaker` outside any dataset, from its own stream.
pub fn voice_clip(spec: &SynthSpec, speaker: usize, stream: u64) -> Result<VoiceClip> {
    spec.validate()?;
    if speaker >= spec.sources {
        return Err(invalid("synth", format!("speaker {speaker} out of range")));
    }
    let mut r = rng::stream(spec.seed, stream);
    Ok(VoiceClip {
        speaker,
        audio: voice(speaker, spec.samples(), spec.sample_rate, spec.snr_db, &mut r),
    })
}

pub const DOA_MICS: usize = 4;
pub const DOA_RADIUS: f64 = 0.05;

/// Frame layout used by the direction scenes.
pub fn doa_frame_config() -> Result<FrameConfig> {
    Ok(FrameConfig::solve(256, 128, WindowShape::Hann)?)
}

fn distinct_azimuths<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0.0..2.0 * PI);
        let clear = out.iter().all(|&b| {
            let d = (a - b).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) >= MIN_SOURCE_GAP
        });
        if clear {
            out.push(a);
        }
    }
    out
}

/// Observe white-noise sources from `azimuths` on the standard array.
pub fn doa_scene<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    config: &FrameConfig,
    azimuths: &[f64],
    samples: usize,
    sample_rate: u32,
    snr_db: f64,
    rng: &mut R,
) -> Result<DoaScene> {
    let sources = azimuths
        .iter()
        .map(|&a| SceneSource {
            direction: Direction::horizontal(a),
            signal: (0..samples).map(|_| normal(rng)).collect(),
        })
        .collect();
    let noise_std = if snr_db == f64::INFINITY { 0.0 } else { 10f64.powf(-snr_db / 20.0) };
    let scene = ArrayScene {
        geometry: geometry.clone(),
        sources,
        noise_std,
        sample_rate,
    };
    Ok(DoaScene {
        observation: simulate_scene(&scene, config, rng)?,
        azimuths: azimuths.to_vec(),
    })
}

/// Like [`doa_scene`], but source `q` of `Q` only sounds during the `q`-th
/// of `Q` equal segments.
pub fn turn_taking_scene<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    config: &FrameConfig,
    azimuths: &[f64],
    samples: usize,
    sample_rate: u32,
    snr_db: f64,
    rng: &mut R,
) -> Result<DoaScene> {
    let q = azimuths.len().max(1);
    let sources = azimuths
        .iter()
        .enumerate()
        .map(|(i, &a)| SceneSource {
            direction: Direction::horizontal(a),
            signal: (0..samples)
                .map(|k| {
                    let v = normal(rng);
                    if k * q / samples == i { v } else { 0.0 }
                })
                .collect(),
        })
        .collect();
    let noise_std = if snr_db == f64::INFINITY { 0.0 } else { 10f64.powf(-snr_db / 20.0) };
    let scene = ArrayScene {
        geometry: geometry.clone(),
        sources,
        noise_std,
        sample_rate,
    };
    Ok(DoaScene {
        observation: simulate_scene(&scene, config, rng)?,
        azimuths: azimuths.to_vec(),
    })
}

fn doa_scenes(spec: &SynthSpec) -> Result<DoaSet> {
    spec.validate()?;
    let geometry = ArrayGeometry::circular(DOA_MICS, DOA_RADIUS)?;
    let config = doa_frame_config()?;
    let scenes = (0..spec.clips)
        .map(|i| {
            let mut r = spec.clip_rng(i);
            let az = distinct_azimuths(spec.sources, &mut r);
            doa_scene(&geometry, &config, &az, spec.samples(), spec.sample_rate, spec.snr_db, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DoaSet {
        geometry,
        config,
        scenes,
    })
}

pub fn denoise_dataset(spec: &SynthSpec) -> Result<Vec<DenoiseClip>> {
    expect_task(spec, TaskKind::Denoise)?;
    denoise_clips(spec)
}

pub fn separation_dataset(spec: &SynthSpec) -> Result<Vec<MixtureClip>> {
    expect_task(spec, TaskKind::Separate)?;
    mixture_clips(spec)
}

pub fn sed_dataset(spec: &SynthSpec) -> Result<Vec<EventClip>> {
    expect_task(spec, TaskKind::Sed)?;
    event_clips(spec)
}

pub fn speaker_dataset(spec: &SynthSpec) -> Result<Vec<VoiceClip>> {
    expect_task(spec, TaskKind::Speaker)?;
    voice_clips(spec)
}

pub fn doa_dataset(spec: &SynthSpec) -> Result<DoaSet> {
    expect_task(spec, TaskKind::Doa)?;
    doa_scenes(spec)
}

fn expect_task(spec: &SynthSpec, task: TaskKind) -> Result<()> {
    if spec.task != task {
        return Err(invalid("synth", format!("expected a {task:?} spec, got {:?}", spec.task)));
    }
    Ok(())
}

/// Seeded 80/20 split of `n` clip indices into (train, held out).
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, 0);
    for k in (1..n).rev() {
        idx.swap(k, r.random_range(0..=k));
    }
    let held = (n / 5).max(usize::from(n > 1));
    let train = idx.split_off(held);
    (train, idx)
}

/// Seeded 80/20 split that holds out a fifth of every label's clips.
pub fn stratified_split(labels: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let (a, b) = split_indices(labels.len(), seed);
    let order: Vec<usize> = b.into_iter().chain(a).collect();
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let members: Vec<usize> = order.iter().copied().filter(|&i| labels[i] == c).collect();
        let h = (members.len() / 5).max(usize::from(members.len() > 1));
        held.extend_from_slice(&members[..h]);
        train.extend_from_slice(&members[h..]);
    }
    (train, held)
}
