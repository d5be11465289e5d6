//! WAV input/output for PCM16 and float32, any channel count.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Deinterleaved audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            channels: vec![samples],
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let reader = hound::WavReader::open(path)?;
    decode(reader)
}

pub fn read_wav_from<R: std::io::Read>(r: R) -> Result<Audio> {
    decode(hound::WavReader::new(r)?)
}

fn decode<R: std::io::Read>(mut reader: hound::WavReader<R>) -> Result<Audio> {
    let spec = reader.spec();
    let m = usize::from(spec.channels);
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(invalid(
                "wav",
                format!("unsupported sample format {fmt:?} with {bits} bits"),
            ))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / m.max(1)); m];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % m].push(v);
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

pub fn write_wav(path: impl AsRef<Path>, audio: &Audio, format: WavFormat) -> Result<()> {
    let m = audio.channels.len();
    if m == 0 || m > usize::from(u16::MAX) {
        return Err(invalid("wav", "channel count out of range"));
    }
    let n = audio.len();
    if audio.channels.iter().any(|c| c.len() != n) {
        return Err(invalid("wav", "channels differ in length"));
    }
    let spec = WavSpec {
        channels: m as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for i in 0..n {
        for ch in &audio.channels {
            match format {
                WavFormat::Pcm16 => {
                    let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    w.write_sample(v)?;
                }
                WavFormat::Float32 => w.write_sample(ch[i] as f32)?,
            }
        }
    }
    w.finalize()?;
    Ok(())
}
