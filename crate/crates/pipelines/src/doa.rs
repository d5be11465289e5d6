//! Direction-of-arrival estimation over an azimuth grid: classical scans
//! and a network trained on smoothed grid labels.

use acoustic_core::layers::Network;
use acoustic_core::losses::{classification, ClassificationKind};
use acoustic_core::{rng, Mode, ParamStore, Tape, Tensor};
use acoustic_dsp::spatial::{
    azimuth_grid, correlation_feature, smoothed_labels, spatial_spectrum, ArrayGeometry, CorrelationWeighting,
    Direction, MultiSpectrogram, DEFAULT_BLOCK,
};

use crate::denoise::infer;
use crate::error::{invalid, Result};
use crate::features::{hcat, select_columns};
use crate::synth::DoaScene;
use crate::train::{fit, FitReport, TrainConfig, INIT_STREAM};

/// Grid cells of the default 5 degree azimuth grid.
pub const GRID_CELLS: usize = 72;

pub enum DoaMethod<'a> {
    /// Delay-and-sum steered power.
    SpatialSpectrum,
    Correlation(CorrelationWeighting),
    Network(&'a mut DoaNet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoaEstimate {
    /// Per-frame scores `[J][T]`, nonnegative and summing to one per frame.
    pub posterior: Vec<Vec<f64>>,
    pub argmax: Vec<usize>,
    /// Argmax of the time-averaged posterior.
    pub summary: usize,
    /// Frames whose argmax falls in each cell.
    pub votes: Vec<usize>,
    /// Local maxima of the vote histogram, most voted first.
    pub peaks: Vec<usize>,
}

/// Shift every frame to a zero minimum and scale it to unit sum; flat
/// frames become uniform.
fn normalize_frames(map: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let j = map.len();
    let t_count = map.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; t_count]; j];
    for t in 0..t_count {
        let lo = (0..j).map(|i| map[i][t]).fold(f64::INFINITY, f64::min);
        let total: f64 = (0..j).map(|i| map[i][t] - lo).sum();
        for i in 0..j {
            out[i][t] = if total > 0.0 { (map[i][t] - lo) / total } else { 1.0 / j as f64 };
        }
    }
    out
}

/// Local maxima on the circular grid, strongest first. Plateaus report
/// their first cell.
pub fn circular_peaks(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            v[i] > prev && v[i] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    peaks
}

pub fn estimate_doa(
    ms: &MultiSpectrogram,
    geometry: &ArrayGeometry,
    method: DoaMethod<'_>,
    grid: &[Direction],
) -> Result<DoaEstimate> {
    estimate_doa_with(ms, geometry, method, grid, DEFAULT_BLOCK)
}

/// [`estimate_doa`] with covariances averaged over `block` frames; short
/// blocks keep the maps of turn-taking sources apart.
pub fn estimate_doa_with(
    ms: &MultiSpectrogram,
    geometry: &ArrayGeometry,
    method: DoaMethod<'_>,
    grid: &[Direction],
    block: usize,
) -> Result<DoaEstimate> {
    let posterior = match method {
        DoaMethod::SpatialSpectrum => normalize_frames(&spatial_spectrum(ms, geometry, grid, block)?),
        DoaMethod::Correlation(w) => normalize_frames(&correlation_feature(ms, geometry, grid, w, block)?),
        DoaMethod::Network(net) => {
            if net.grid_len != grid.len() {
                return Err(invalid("estimate_doa", "network trained on a different grid"));
            }
            normalize_frames(&net.scores(ms, geometry)?)
        }
    };
    let argmax = acoustic_dsp::spatial::argmax_per_frame(&posterior);
    let t_count = posterior.first().map_or(0, Vec::len).max(1) as f64;
    let avg: Vec<f64> = posterior.iter().map(|row| row.iter().sum::<f64>() / t_count).collect();
    let summary = (0..avg.len()).max_by(|&a, &b| avg[a].total_cmp(&avg[b]).then(b.cmp(&a))).unwrap_or(0);
    let mut votes = vec![0usize; grid.len()];
    for &a in &argmax {
        votes[a] += 1;
    }
    let counts: Vec<f64> = votes.iter().map(|&v| v as f64).collect();
    Ok(DoaEstimate {
        posterior,
        argmax,
        summary,
        votes,
        peaks: circular_peaks(&counts),
    })
}

/// Angular distance between two azimuths in radians.
pub fn azimuth_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoaNetConfig {
    /// Hidden layers; a sigmoid layer with one output per cell is appended.
    pub hidden: String,
    /// Label width in unit-vector distance.
    pub sigma: f64,
    /// `batch` counts frames.
    pub train: TrainConfig,
}

impl Default for DoaNetConfig {
    fn default() -> Self {
        Self {
            hidden: "dense out=64 act=relu".into(),
            sigma: 0.1,
            train: TrainConfig {
                epochs: 30,
                batch: 64,
                lr: 3e-3,
                ..TrainConfig::default()
            },
        }
    }
}

/// MLP from the per-frame PHAT correlation map to grid-cell scores.
#[derive(Clone, Debug)]
pub struct DoaNet {
    pub net: Network,
    pub store: ParamStore,
    pub grid_len: usize,
}

/// PHAT map standardized per frame, as `[J, T]`.
fn phat_input(ms: &MultiSpectrogram, geometry: &ArrayGeometry, grid: &[Direction]) -> Result<Tensor> {
    let map = correlation_feature(ms, geometry, grid, CorrelationWeighting::Phat, DEFAULT_BLOCK)?;
    let j = map.len();
    let t_count = map[0].len();
    let mut data = vec![0.0; j * t_count];
    for t in 0..t_count {
        let m = (0..j).map(|i| map[i][t]).sum::<f64>() / j as f64;
        let s = ((0..j).map(|i| (map[i][t] - m).powi(2)).sum::<f64>() / j as f64).sqrt().max(1e-12);
        for i in 0..j {
            data[i * t_count + t] = (map[i][t] - m) / s;
        }
    }
    Ok(Tensor::matrix(j, t_count, data)?)
}

impl DoaNet {
    /// Per-frame cell scores `[J][T]`.
    pub fn scores(&mut self, ms: &MultiSpectrogram, geometry: &ArrayGeometry) -> Result<Vec<Vec<f64>>> {
        let grid = azimuth_grid(self.grid_len);
        let y = infer(&mut self.net, &self.store, &phat_input(ms, geometry, &grid)?)?;
        Ok((0..y.rows()).map(|r| y.row(r).to_vec()).collect())
    }
}

/// Train on every frame of `scenes`, validating on `held`.
pub fn train_doa_net(
    scenes: &[DoaScene],
    held: &[DoaScene],
    geometry: &ArrayGeometry,
    cfg: &DoaNetConfig,
) -> Result<(DoaNet, FitReport)> {
    if scenes.is_empty() || held.is_empty() {
        return Err(invalid("train_doa_net", "need training and held-out scenes"));
    }
    let grid = azimuth_grid(GRID_CELLS);
    let prepare = |set: &[DoaScene]| -> Result<(Tensor, Tensor)> {
        let mut xs = Vec::with_capacity(set.len());
        let mut ys = Vec::with_capacity(set.len());
        for s in set {
            let x = phat_input(&s.observation.observed, geometry, &grid)?;
            let truths: Vec<Direction> = s.azimuths.iter().map(|&a| Direction::horizontal(a)).collect();
            let label = smoothed_labels(&truths, &grid, cfg.sigma)?;
            let t = x.cols();
            let mut y = Tensor::zeros(vec![grid.len(), t]);
            for (i, &v) in label.iter().enumerate() {
                for c in 0..t {
                    y.set(i, c, v);
                }
            }
            xs.push(x);
            ys.push(y);
        }
        Ok((hcat(&xs.iter().collect::<Vec<_>>())?, hcat(&ys.iter().collect::<Vec<_>>())?))
    };
    let (x, y) = prepare(scenes)?;
    let (hx, hy) = prepare(held)?;
    let descriptor = format!("{}\ndense out={} act=sigmoid", cfg.hidden, grid.len());
    let mut store = ParamStore::new();
    let mut init = rng::stream(cfg.train.seed, INIT_STREAM);
    let mut net = Network::from_descriptor(&descriptor, grid.len(), &mut store, &mut init)?;
    let report = fit(
        &mut net,
        &mut store,
        x.cols(),
        &cfg.train,
        |net, tape, p, idx, r| {
            let xv = tape.leaf(select_columns(&x, idx))?;
            let out = net.forward(tape, p, xv, Mode::Train, r)?;
            Ok(classification(tape, ClassificationKind::Bce, &select_columns(&y, idx), out)?)
        },
        |net, store| {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape)?;
            let xv = tape.leaf(hx.clone())?;
            let out = net.forward(&mut tape, &p, xv, Mode::Infer, &mut rng::seeded(0))?;
            let l = classification(&mut tape, ClassificationKind::Bce, &hy, out)?;
            Ok(tape.value(l).item() / hx.cols() as f64)
        },
    )?;
    Ok((
        DoaNet {
            net,
            store,
            grid_len: grid.len(),
        },
        report,
    ))
}
