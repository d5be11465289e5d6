//! Direct-path array model and direction-of-arrival features.
//!
//! A plane wave from unit direction `phi` reaches microphone `m` with
//! relative phase `exp(-j w (r_1 - r_m)^T phi / c)` against the reference
//! microphone `r_1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;

use acoustic_core::{rng::normal, Tensor};

use crate::error::{invalid, DspError, Result};
use crate::stft::{stft, Spectrogram};
use crate::window::FrameConfig;

pub const SPEED_OF_SOUND: f64 = 343.0;

/// Frames averaged into each spatial covariance estimate by default.
pub const DEFAULT_BLOCK: usize = 50;

/// Below this column norm an ACCDOA vector carries no direction.
pub const ACCDOA_MIN_NORM: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    speed: f64,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>, speed: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(invalid("geometry", "need at least two microphones"));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(invalid("geometry", "speed of sound must be positive"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("geometry", "positions must be finite"));
        }
        for i in 0..positions.len() {
            for j in 0..i {
                if positions[i] == positions[j] {
                    return Err(invalid("geometry", format!("microphones {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { positions, speed })
    }

    /// Regular tetrahedron with vertices at distance `radius` from the origin.
    pub fn tetrahedral(radius: f64) -> Result<Self> {
        let s = radius / 3f64.sqrt();
        Self::new(
            vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]],
            SPEED_OF_SOUND,
        )
    }

    /// `m` microphones on a horizontal circle, the first on the x axis.
    pub fn circular(m: usize, radius: f64) -> Result<Self> {
        let pos = (0..m)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / m as f64;
                [radius * a.cos(), radius * a.sin(), 0.0]
            })
            .collect();
        Self::new(pos, SPEED_OF_SOUND)
    }

    /// `m` microphones along the x axis.
    pub fn linear(m: usize, spacing: f64) -> Result<Self> {
        Self::new((0..m).map(|i| [i as f64 * spacing, 0.0, 0.0]).collect(), SPEED_OF_SOUND)
    }

    pub fn mics(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn max_spacing(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.positions {
            for b in &self.positions {
                d = d.max(dist(a, b));
            }
        }
        d
    }

    /// Angular frequency above which phase differences can wrap:
    /// `pi c / max_spacing`.
    pub fn alias_limit(&self) -> f64 {
        PI * self.speed / self.max_spacing()
    }

    /// Delay of microphone `m` relative to the reference for direction `phi`,
    /// `(r_1 - r_m)^T phi / c` in seconds.
    pub fn relative_delay(&self, m: usize, dir: &Direction) -> f64 {
        let u = dir.unit();
        let r1 = self.positions[0];
        let rm = self.positions[m];
        (0..3).map(|i| (r1[i] - rm[i]) * u[i]).sum::<f64>() / self.speed
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Elevation from the `+z` axis and azimuth from the `+x` axis, radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    elevation: f64,
    azimuth: f64,
}

impl Direction {
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&elevation) || !azimuth.is_finite() {
            return Err(invalid("direction", format!("elevation {elevation} outside [0, pi]")));
        }
        Ok(Self {
            elevation,
            azimuth: azimuth.rem_euclid(2.0 * PI),
        })
    }

    /// Direction in the horizontal plane.
    pub fn horizontal(azimuth: f64) -> Self {
        Self {
            elevation: PI / 2.0,
            azimuth: azimuth.rem_euclid(2.0 * PI),
        }
    }

    pub fn from_degrees(elevation: f64, azimuth: f64) -> Result<Self> {
        Self::new(elevation.to_radians(), azimuth.to_radians())
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn unit(&self) -> [f64; 3] {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Option<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        let z = (v[2] / n).clamp(-1.0, 1.0);
        Some(Self {
            elevation: z.acos(),
            azimuth: v[1].atan2(v[0]).rem_euclid(2.0 * PI),
        })
    }

    /// Great-circle angle to another direction.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (a, b) = (self.unit(), other.unit());
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// Horizontal ring of `j` directions, the first at azimuth 0.
pub fn azimuth_grid(j: usize) -> Vec<Direction> {
    (0..j)
        .map(|i| Direction::horizontal(2.0 * PI * i as f64 / j as f64))
        .collect()
}

/// Index of the grid direction closest to `dir`.
pub fn nearest(grid: &[Direction], dir: &Direction) -> Option<usize> {
    grid.iter()
        .enumerate()
        .min_by(|a, b| a.1.angle_to(dir).total_cmp(&b.1.angle_to(dir)))
        .map(|(i, _)| i)
}

/// Array manifold vector at angular frequency `omega`.
pub fn steering_vector(omega: f64, geom: &ArrayGeometry, dir: &Direction) -> Vec<Complex64> {
    (0..geom.mics())
        .map(|m| {
            if m == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, -omega * geom.relative_delay(m, dir))
            }
        })
        .collect()
}

/// Spectrograms of every microphone on a shared framing.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSpectrogram {
    pub channels: Vec<Spectrogram>,
}

impl MultiSpectrogram {
    pub fn new(channels: Vec<Spectrogram>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| invalid("multichannel", "no channels"))?;
        if channels.iter().any(|c| {
            c.frame_count() != first.frame_count()
                || c.config != first.config
                || c.sample_rate != first.sample_rate
        }) {
            return Err(invalid("multichannel", "channels disagree in framing"));
        }
        Ok(Self { channels })
    }

    /// Analyse time-domain channels.
    pub fn analyse(signals: &[Vec<f64>], config: &FrameConfig, sample_rate: u32) -> Result<Self> {
        let channels = signals
            .iter()
            .map(|s| stft(s, config, sample_rate))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels)
    }

    pub fn mics(&self) -> usize {
        self.channels.len()
    }

    pub fn frame_count(&self) -> usize {
        self.channels[0].frame_count()
    }

    pub fn bins(&self) -> usize {
        self.channels[0].bins()
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.channels[0].omega(k)
    }

    /// Observation vector `p(w_k, t)` across microphones.
    pub fn snapshot(&self, t: usize, k: usize) -> DVector<Complex64> {
        DVector::from_iterator(self.mics(), self.channels.iter().map(|c| c.frames[t][k]))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.channels {
            for fr in &mut c.frames {
                for v in fr {
                    *v *= gain;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SceneSource {
    pub direction: Direction,
    pub signal: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ArrayScene {
    pub geometry: ArrayGeometry,
    pub sources: Vec<SceneSource>,
    /// Standard deviation of the white noise at each microphone, in signal
    /// units per sample.
    pub noise_std: f64,
    pub sample_rate: u32,
}

#[derive(Clone, Debug)]
pub struct SceneObservation {
    pub observed: MultiSpectrogram,
    /// Reference-microphone spectrum of every source.
    pub sources: Vec<Spectrogram>,
    pub directions: Vec<Direction>,
}

/// Per-bin observation `sum_q d(w, phi_q) S_q(w, t) + v(w, t)` with complex
/// Gaussian noise whose per-bin power matches white noise of `noise_std`
/// seen through the analysis window.
pub fn simulate_scene<R: Rng + ?Sized>(
    scene: &ArrayScene,
    config: &FrameConfig,
    rng: &mut R,
) -> Result<SceneObservation> {
    let first = scene
        .sources
        .first()
        .ok_or_else(|| invalid("simulate_scene", "scene has no sources"))?;
    let len = first.signal.len();
    if scene.sources.iter().any(|s| s.signal.len() != len) {
        return Err(invalid("simulate_scene", "source signals differ in length"));
    }
    if scene.noise_std < 0.0 {
        return Err(invalid("simulate_scene", "noise level must be nonnegative"));
    }
    let spectra = scene
        .sources
        .iter()
        .map(|s| stft(&s.signal, config, scene.sample_rate))
        .collect::<Result<Vec<_>>>()?;
    let m = scene.geometry.mics();
    let k_count = config.bins();
    let t_count = spectra[0].frame_count();
    let steer: Vec<Vec<Vec<Complex64>>> = scene
        .sources
        .iter()
        .map(|s| {
            (0..k_count)
                .map(|k| steering_vector(spectra[0].omega(k), &scene.geometry, &s.direction))
                .collect()
        })
        .collect();
    let window_energy: f64 = config.window().iter().map(|w| w * w).sum();
    let part_std = scene.noise_std * (window_energy / 2.0).sqrt();
    let mut channels = vec![spectra[0].clone(); m];
    for t in 0..t_count {
        for k in 0..k_count {
            for (mi, ch) in channels.iter_mut().enumerate() {
                let mut v: Complex64 = spectra
                    .iter()
                    .zip(&steer)
                    .map(|(s, d)| d[k][mi] * s.frames[t][k])
                    .sum();
                if part_std > 0.0 {
                    // DC and Nyquist bins of a real signal are real.
                    v += if k == 0 || 2 * k == config.window_len() {
                        Complex64::new(part_std * std::f64::consts::SQRT_2 * normal(rng), 0.0)
                    } else {
                        Complex64::new(part_std * normal(rng), part_std * normal(rng))
                    };
                }
                ch.frames[t][k] = v;
            }
        }
    }
    Ok(SceneObservation {
        observed: MultiSpectrogram::new(channels)?,
        sources: spectra,
        directions: scene.sources.iter().map(|s| s.direction).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    None,
    /// Rotate every channel by the conjugate phase of the reference.
    Reference,
    /// As `Reference`, without the reference channel rows.
    ReferenceDropped,
}

/// Real and imaginary parts of frame `t` stacked as `[2M, K]` (real rows
/// first), or `[2(M-1), K]` when the reference is dropped.
pub fn raw_features(ms: &MultiSpectrogram, t: usize, align: Alignment) -> Result<Tensor> {
    if ms.mics() < 2 {
        return Err(invalid("raw_features", "need at least two channels"));
    }
    if t >= ms.frame_count() {
        return Err(invalid("raw_features", format!("frame {t} out of range")));
    }
    let k_count = ms.bins();
    let mut rows: Vec<Vec<Complex64>> = ms.channels.iter().map(|c| c.frames[t].clone()).collect();
    if align != Alignment::None {
        let reference = rows[0].clone();
        for row in &mut rows {
            for (v, r) in row.iter_mut().zip(&reference) {
                let n = r.norm();
                *v = if n > 0.0 { *v * r.conj() / n } else { *v };
            }
        }
        if align == Alignment::ReferenceDropped {
            rows.remove(0);
        }
    }
    let mut data = Vec::with_capacity(2 * rows.len() * k_count);
    for row in &rows {
        data.extend(row.iter().map(|c| c.re));
    }
    for row in &rows {
        data.extend(row.iter().map(|c| c.im));
    }
    Ok(Tensor::matrix(2 * rows.len(), k_count, data)?)
}

/// Bins used for direction scanning: above DC and below the aliasing limit.
pub fn usable_bins(ms: &MultiSpectrogram, geom: &ArrayGeometry) -> Vec<usize> {
    let limit = geom.alias_limit();
    (1..ms.bins()).filter(|&k| ms.omega(k) < limit).collect()
}

/// Spatial covariance `Phi(w_k, t)` averaged over the `block` most recent
/// frames ending at `t`.
pub fn covariance(ms: &MultiSpectrogram, k: usize, t: usize, block: usize) -> DMatrix<Complex64> {
    let m = ms.mics();
    let start = (t + 1).saturating_sub(block.max(1));
    let mut phi = DMatrix::zeros(m, m);
    for s in start..=t {
        let p = ms.snapshot(s, k);
        phi += &p * p.adjoint();
    }
    phi / Complex64::new((t + 1 - start) as f64, 0.0)
}

fn check_scan(ms: &MultiSpectrogram, geom: &ArrayGeometry, grid: &[Direction]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("direction scan", "empty grid"));
    }
    if ms.mics() != geom.mics() {
        return Err(invalid(
            "direction scan",
            format!("{} channels but {} microphones", ms.mics(), geom.mics()),
        ));
    }
    Ok(())
}

/// `sum_k Re[h^H Phi h]` over usable bins for every grid direction and frame,
/// `[J][T]`, with `Phi` mapped through `weight` before scanning.
fn scan(
    ms: &MultiSpectrogram,
    geom: &ArrayGeometry,
    grid: &[Direction],
    block: usize,
    weight: impl Fn(DMatrix<Complex64>) -> Option<DMatrix<Complex64>>,
    steer_scale: f64,
) -> Vec<Vec<f64>> {
    let bins = usable_bins(ms, geom);
    let steer: Vec<Vec<DVector<Complex64>>> = grid
        .iter()
        .map(|d| {
            bins.iter()
                .map(|&k| {
                    DVector::from_vec(steering_vector(ms.omega(k), geom, d)) * Complex64::new(steer_scale, 0.0)
                })
                .collect()
        })
        .collect();
    let t_count = ms.frame_count();
    let mut map = vec![vec![0.0; t_count]; grid.len()];
    for t in 0..t_count {
        for (bi, &k) in bins.iter().enumerate() {
            let Some(phi) = weight(covariance(ms, k, t, block)) else {
                continue;
            };
            for (j, s) in steer.iter().enumerate() {
                let h = &s[bi];
                map[j][t] += (h.adjoint() * &phi * h)[(0, 0)].re;
            }
        }
    }
    map
}

/// Delay-and-sum steered power `sum_k h_j^H Phi h_j` with `h_j = d/M` and
/// `Phi` normalized to unit trace. Returns `[J][T]`.
pub fn spatial_spectrum(
    ms: &MultiSpectrogram,
    geom: &ArrayGeometry,
    grid: &[Direction],
    block: usize,
) -> Result<Vec<Vec<f64>>> {
    check_scan(ms, geom, grid)?;
    let m = geom.mics() as f64;
    let map = scan(
        ms,
        geom,
        grid,
        block,
        |phi| {
            let tr = phi.trace().re;
            (tr > 0.0).then(|| phi / Complex64::new(tr, 0.0))
        },
        1.0 / m,
    );
    // Rounding can leave tiny negative values for rank-deficient Phi.
    Ok(map
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationWeighting {
    /// Every cross-spectrum element divided by its modulus.
    Phat,
    /// Cross-spectra kept, normalized by the covariance trace.
    Magnitude,
}

/// `sum_k Re[d^H Phi~ d]` with the chosen element weighting. Returns `[J][T]`.
pub fn correlation_feature(
    ms: &MultiSpectrogram,
    geom: &ArrayGeometry,
    grid: &[Direction],
    weighting: CorrelationWeighting,
    block: usize,
) -> Result<Vec<Vec<f64>>> {
    check_scan(ms, geom, grid)?;
    Ok(scan(
        ms,
        geom,
        grid,
        block,
        |phi| match weighting {
            CorrelationWeighting::Phat => Some(phi.map(|v| {
                let n = v.norm();
                if n > 0.0 {
                    v / n
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })),
            CorrelationWeighting::Magnitude => {
                let tr = phi.trace().re;
                (tr > 0.0).then(|| phi / Complex64::new(tr, 0.0))
            }
        },
        1.0,
    ))
}

/// Per-frame argmax of a `[J][T]` map.
pub fn argmax_per_frame(map: &[Vec<f64>]) -> Vec<usize> {
    let t_count = map.first().map_or(0, Vec::len);
    (0..t_count)
        .map(|t| {
            (0..map.len())
                .max_by(|&a, &b| map[a][t].total_cmp(&map[b][t]))
                .unwrap_or(0)
        })
        .collect()
}

/// Eigenvector of the largest eigenvalue of a Hermitian matrix.
pub fn principal_eigenvector(phi: &DMatrix<Complex64>) -> DVector<Complex64> {
    let eig = phi.clone().symmetric_eigen();
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    eig.eigenvectors.column(best).into_owned()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSolve {
    /// Minimum-norm least-squares solution before renormalization.
    pub vector: [f64; 3],
    /// `None` when the solution vanishes.
    pub direction: Option<Direction>,
    pub residual: f64,
    pub rank: usize,
    /// `omega` is at or above the aliasing limit, so wrapped phases may bias
    /// the answer.
    pub aliased: bool,
}

/// Solve `(r_1 - r_m)^T phi = -(c / w) angle(u_m)` for `m >= 2` in the
/// least-squares sense. `u` is first rotated so its reference element has
/// zero phase, which removes the arbitrary phase of an eigenvector.
pub fn solve_direction_from_phase(
    u: &[Complex64],
    geom: &ArrayGeometry,
    omega: f64,
) -> Result<DirectionSolve> {
    let m = geom.mics();
    if u.len() != m {
        return Err(invalid("direction solve", format!("vector has {} entries, array {m}", u.len())));
    }
    if !(omega > 0.0) {
        return Err(invalid("direction solve", "omega must be positive"));
    }
    let r0 = u[0].norm();
    if r0 == 0.0 {
        return Err(invalid("direction solve", "reference element is zero"));
    }
    let rot = u[0].conj() / r0;
    let pos = geom.positions();
    let a = DMatrix::from_fn(m - 1, 3, |i, j| pos[0][j] - pos[i + 1][j]);
    let b = DVector::from_fn(m - 1, |i, _| -geom.speed() / omega * (u[i + 1] * rot).arg());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * (m as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank == 0 {
        return Err(DspError::RankDeficient { rank, needed: 1 });
    }
    let x = svd
        .solve(&b, tol)
        .map_err(|e| invalid("direction solve", e.to_string()))?;
    let residual = (&a * &x - &b).norm();
    let v = Vector3::new(x[0], x[1], x[2]);
    let vector = [v.x, v.y, v.z];
    let direction = if v.norm() > 1e-12 {
        Direction::from_vector(vector)
    } else {
        None
    };
    Ok(DirectionSolve {
        vector,
        direction,
        residual,
        rank,
        aliased: omega >= geom.alias_limit(),
    })
}

/// 1 at the grid cell nearest each true direction, 0 elsewhere.
pub fn onehot_labels(truths: &[Direction], grid: &[Direction]) -> Vec<f64> {
    let mut y = vec![0.0; grid.len()];
    for d in truths {
        if let Some(i) = nearest(grid, d) {
            y[i] = 1.0;
        }
    }
    y
}

/// `max_q exp(-||phi_q - phi_j||^2 / sigma^2)` per grid direction.
pub fn smoothed_labels(truths: &[Direction], grid: &[Direction], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(invalid("smoothed_labels", "sigma must be positive"));
    }
    Ok(grid
        .iter()
        .map(|g| {
            let gu = g.unit();
            truths
                .iter()
                .map(|d| {
                    let du = d.unit();
                    let d2: f64 = gu.iter().zip(&du).map(|(a, b)| (a - b).powi(2)).sum();
                    (-d2 / (sigma * sigma)).exp()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Activity-coupled Cartesian targets: column `l` is `p_l * phi_l`.
/// `events` lists `(class, probability, direction)`; absent classes stay zero.
pub fn accdoa_encode(events: &[(usize, f64, Direction)], classes: usize) -> Result<Vec<[f64; 3]>> {
    let mut cols = vec![[0.0; 3]; classes];
    for &(l, p, d) in events {
        if l >= classes {
            return Err(invalid("accdoa", format!("class {l} out of range")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("accdoa", "probability outside [0, 1]"));
        }
        let u = d.unit();
        cols[l] = [p * u[0], p * u[1], p * u[2]];
    }
    Ok(cols)
}

/// `(||column||, column / ||column||)` per class.
pub fn accdoa_decode(cols: &[[f64; 3]]) -> Vec<(f64, Option<Direction>)> {
    cols.iter()
        .map(|c| {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if n < ACCDOA_MIN_NORM {
                (n, None)
            } else {
                (n, Direction::from_vector(*c))
            }
        })
        .collect()
}
