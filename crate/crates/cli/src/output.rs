//! Run context: seeds, artifact writing, input reading and worker fan-out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;

use acoustic_core::{io::write_params, ParamStore};
use acoustic_dsp::{read_wav, write_wav, Audio, WavFormat};
use acoustic_pipelines::PipelineError;

use crate::config::RunConfig;

/// Unreadable or malformed WAV/CSV input; maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub dry_run: bool,
}

impl Ctx {
    pub fn new(cfg: &RunConfig, seed: Option<u64>, out: Option<PathBuf>, threads: Option<usize>, dry_run: bool) -> Result<Self> {
        let threads = threads.or(cfg.threads).unwrap_or(1);
        if threads == 0 {
            bail!(crate::config::ConfigError("threads must be at least 1".into()));
        }
        Ok(Self {
            seed: seed.or(cfg.seed).unwrap_or(0),
            out: out.or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out")),
            threads,
            dry_run,
        })
    }

    /// Print the plan; true when the run should stop here.
    pub fn plan(&self, command: &str, steps: &[String]) -> bool {
        if !self.dry_run {
            return false;
        }
        println!("plan: {command} (seed {}, out {}, threads {})", self.seed, self.out.display(), self.threads);
        for s in steps {
            println!("  - {s}");
        }
        true
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name)?;
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    pub fn write_audio(&self, name: &str, audio: &Audio) -> Result<()> {
        let p = self.path(name)?;
        write_wav(&p, audio, WavFormat::Float32).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    pub fn write_model(&self, name: &str, store: &ParamStore) -> Result<()> {
        let mut buf = Vec::new();
        write_params(&mut buf, store)?;
        let p = self.path(name)?;
        fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    /// Unwrap a pipeline result; a divergence leaves its parameter dump in
    /// `diverged.apar` before failing.
    pub fn pipeline<T>(&self, r: std::result::Result<T, PipelineError>) -> Result<T> {
        match r {
            Ok(v) => Ok(v),
            Err(PipelineError::Diverged(dump)) => {
                let mut store = ParamStore::new();
                for (n, t) in dump.names.iter().zip(&dump.params) {
                    store.add(n.clone(), t.clone());
                }
                self.write_model("diverged.apar", &store)?;
                bail!("training diverged at epoch {} step {} (loss {})", dump.epoch, dump.step, dump.loss)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// `f` over `items` on up to `threads` workers, results in input order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
        if self.threads <= 1 || items.len() <= 1 {
            return items.iter().map(&f).collect();
        }
        let chunk = items.len().div_ceil(self.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    }
}

pub fn read_audio(path: &Path) -> Result<Audio> {
    let audio = read_wav(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    if audio.is_empty() {
        bail!(InputError(format!("{}: no samples", path.display())));
    }
    Ok(audio)
}

pub fn read_mono(path: &Path) -> Result<(u32, Vec<f64>)> {
    let mut audio = read_audio(path)?;
    if audio.channels.len() != 1 {
        bail!(InputError(format!("{}: expected mono, found {} channels", path.display(), audio.channels.len())));
    }
    Ok((audio.sample_rate, audio.channels.remove(0)))
}

pub fn read_points(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let m = acoustic_transforms::read_matrix(file).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    if m.nrows() == 0 {
        bail!(InputError(format!("{}: no rows", path.display())));
    }
    Ok(m)
}

/// CSV text from a header and rows of displayable cells.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{header}");
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}
