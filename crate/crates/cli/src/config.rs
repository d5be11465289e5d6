//! Run configuration: one TOML document with optional sections per
//! command. Unknown keys are rejected and errors carry the field path.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use acoustic_core::rng;
use acoustic_pipelines::{SynthSpec, TaskKind, TrainConfig};

/// Derived-seed counters under the root seed.
pub const DATA_STREAM: u64 = 1;
pub const TRAIN_STREAM: u64 = 2;
pub const PROBE_STREAM: u64 = 3;
pub const METHOD_STREAM: u64 = 4;

/// Seed number `id` fanned out from `root`.
pub fn derive_seed(root: u64, id: u64) -> u64 {
    use rand::RngCore;
    rng::stream(root, id).next_u64()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub denoise: DenoiseSection,
    #[serde(default)]
    pub separate: SeparateSection,
    #[serde(default)]
    pub sed: SedSection,
    #[serde(default)]
    pub speaker: SpeakerSection,
    #[serde(default)]
    pub doa: DoaSection,
    #[serde(default)]
    pub visualize: VisualizeSection,
    #[serde(default)]
    pub diffuse: DiffuseSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

/// Overrides of the task's synthetic dataset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub sample_rate: Option<u32>,
    pub duration: Option<f64>,
    pub snr_db: Option<f64>,
    pub sources: Option<usize>,
    pub event_density: Option<f64>,
    pub clips: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub patience: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskLossName {
    BceMask,
    Spectral,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseSection {
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub context: Option<usize>,
    pub hidden: Option<String>,
    pub loss: Option<MaskLossName>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateSection {
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub hidden: Option<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationName {
    Max,
    Mean,
    LinearSoftmax,
    SoftmaxWeighted,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SedSection {
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub mel_bands: Option<usize>,
    pub context: Option<usize>,
    pub hidden: Option<String>,
    pub aggregation: Option<AggregationName>,
    /// Temperature of softmax-weighted pooling.
    pub tau: Option<f64>,
    pub global: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub min_frames: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerSection {
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub mel_bands: Option<usize>,
    pub coefficients: Option<usize>,
    pub descriptor: Option<String>,
    pub tau: Option<f64>,
    pub steps_per_epoch: Option<usize>,
    pub enroll_clips: Option<usize>,
    /// Minimum cosine score for a match.
    pub threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DoaMethodName {
    Spectrum,
    Phat,
    Magnitude,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaSection {
    pub method: Option<DoaMethodName>,
    /// Frames per covariance block.
    pub block: Option<usize>,
    pub cells: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMethod {
    Tsne,
    Mds,
    Lle,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualizeSection {
    pub method: Option<EmbedMethod>,
    pub dims: Option<usize>,
    pub perplexity: Option<f64>,
    pub iterations: Option<usize>,
    pub neighbors: Option<usize>,
    pub ridge: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseSection {
    pub steps: Option<usize>,
    pub train_steps: Option<usize>,
    pub hidden: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub seeds: Option<Vec<u64>>,
}

/// Raised for schema violations; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError(format!("config: {}", e.message())))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("config field `{path}`: {}", e.inner().message())).into()
    })
}

pub fn load(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse(&text)
        }
    }
}

impl RunConfig {
    pub fn synth_spec(&self, task: TaskKind, seed: u64) -> Result<SynthSpec> {
        let s = &self.synth;
        let base = SynthSpec::for_task(task, seed);
        let spec = SynthSpec {
            sample_rate: s.sample_rate.unwrap_or(base.sample_rate),
            duration: s.duration.unwrap_or(base.duration),
            snr_db: s.snr_db.unwrap_or(base.snr_db),
            sources: s.sources.unwrap_or(base.sources),
            event_density: s.event_density.unwrap_or(base.event_density),
            clips: s.clips.unwrap_or(base.clips),
            ..base
        };
        if let Err(e) = spec.validate() {
            bail!(ConfigError(format!("config section `synth`: {e}")));
        }
        Ok(spec)
    }

    pub fn train_config(&self, base: TrainConfig, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs.unwrap_or(base.epochs),
            batch: t.batch.unwrap_or(base.batch),
            lr: t.lr.unwrap_or(base.lr),
            patience: t.patience.unwrap_or(base.patience),
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse("[denoise]\nwindow = 3\n").unwrap_err();
        assert!(err.to_string().contains("denoise"), "{err}");
        let err = parse("[train]\nepochs = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("train.epochs"), "{err}");
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn sections_are_optional() {
        let c = parse("seed = 4\n[sed]\naggregation = \"softmax_weighted\"\ntau = 2.0\n").unwrap();
        assert_eq!(c.seed, Some(4));
        assert!(matches!(c.sed.aggregation, Some(AggregationName::SoftmaxWeighted)));
        assert!(c.denoise.hidden.is_none());
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(0, DATA_STREAM), derive_seed(0, TRAIN_STREAM));
        assert_eq!(derive_seed(9, PROBE_STREAM), derive_seed(9, PROBE_STREAM));
    }
}
