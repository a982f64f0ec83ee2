//! Strongest-AoA beam training on a uniform angular grid.
//!
//! Each user first radiates a tone from one antenna; the base station
//! correlates the single array snapshot with every grid beam and keeps the
//! strongest one. The base station then sends a tone back through that beam
//! and the user repeats the search on its own grid. Tones are modelled at
//! baseband: users are separated by their tone frequencies, so every user is
//! trained on an independent, interference-free snapshot.

use std::f64::consts::PI;

use rand::Rng;

use crate::array_channel::{ChannelRealization, SystemDims};
use crate::linalg::cis;
use crate::rng::{complex_normal, complex_normal_vector};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// `J` candidate beams, `(1/sqrt(n)) exp(+j 2 pi m (d/lambda) cos(angle_i))`
/// at `angle_i = i * pi / J`.
#[derive(Debug, Clone)]
pub struct DetectionGrid {
    pub angles: Vec<f64>,
    /// `n_elems x J`, one unit-norm column per candidate angle.
    pub vectors: CMatrix,
}

impl DetectionGrid {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn n_elems(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn column(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// Index whose angle is closest to `angle` in the cosine domain.
    pub fn nearest_index(&self, angle: f64) -> usize {
        let c = angle.cos();
        let mut best = 0;
        for (i, a) in self.angles.iter().enumerate() {
            if (a.cos() - c).abs() < (self.angles[best].cos() - c).abs() {
                best = i;
            }
        }
        best
    }

    /// Largest spacing between neighbouring grid points in the cosine domain.
    pub fn max_cos_step(&self) -> f64 {
        self.angles
            .windows(2)
            .map(|w| (w[1].cos() - w[0].cos()).abs())
            .fold(0.0, f64::max)
    }
}

/// `ceil(2 n / 1.782)`: grid steps needed to cover `[0, pi)` at roughly half
/// a beamwidth per step.
pub fn default_grid_size(n_elems: usize) -> usize {
    (2.0 * n_elems as f64 / 1.782).ceil() as usize
}

pub fn build_detection_grid(j: usize, n_elems: usize, spacing_ratio: f64) -> Result<DetectionGrid> {
    if j < 2 {
        return Err(Error::invalid(format!("detection grid needs J >= 2, got {j}")));
    }
    if n_elems == 0 {
        return Err(Error::invalid("detection grid needs at least one element"));
    }
    let angles: Vec<f64> = (0..j).map(|i| i as f64 * PI / j as f64).collect();
    let scale = 1.0 / (n_elems as f64).sqrt();
    let vectors = CMatrix::from_fn(n_elems, j, |m, i| {
        cis(2.0 * PI * m as f64 * spacing_ratio * angles[i].cos()) * scale
    });
    Ok(DetectionGrid { angles, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Per-antenna noise variance at the base station.
    pub sigma2_bs: f64,
    /// Per-antenna noise variance at the users.
    pub sigma2_ms: f64,
    /// Transmitted tone power.
    pub tone_energy: f64,
    /// Draw fresh noise for every grid correlation instead of projecting one
    /// array snapshot onto all beams.
    pub fresh_noise_per_correlation: bool,
}

impl NoiseConfig {
    pub fn noiseless(tone_energy: f64) -> Self {
        NoiseConfig {
            sigma2_bs: 0.0,
            sigma2_ms: 0.0,
            tone_energy,
            fresh_noise_per_correlation: false,
        }
    }

    /// Unit tone energy with both noise variances set from a tone SNR.
    pub fn from_tone_snr(tone_snr: f64) -> Self {
        let sigma2 = if tone_snr.is_infinite() { 0.0 } else { 1.0 / tone_snr };
        NoiseConfig {
            sigma2_bs: sigma2,
            sigma2_ms: sigma2,
            tone_energy: 1.0,
            fresh_noise_per_correlation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_bs >= 0.0 && self.sigma2_ms >= 0.0 && self.tone_energy >= 0.0) {
            return Err(Error::invalid("noise variances and tone energy must be nonnegative"));
        }
        Ok(())
    }
}

/// Analog beamformers chosen by training.
#[derive(Debug, Clone)]
pub struct AnalogBeamformers {
    /// `M x N`, column `k` is the grid beam chosen for user `k`.
    pub f_rf: CMatrix,
    /// `P x N`, column `k` is user `k`'s chosen grid vector `w_k`; the user
    /// combines with `w_k^H` and transmits with `conj(w_k)`.
    pub q_rf: CMatrix,
    pub bs_grid_idx: Vec<usize>,
    pub ue_grid_idx: Vec<usize>,
    /// Grid angles of the chosen beams, radians.
    pub bs_angles: Vec<f64>,
    pub ue_angles: Vec<f64>,
}

/// Projects `signal + noise` onto every grid beam, with `project` giving the
/// inner product used by the receiver.
fn correlate<R: Rng + ?Sized>(
    grid: &DetectionGrid,
    signal: &CVector,
    sigma2: f64,
    fresh: bool,
    rng: &mut R,
    project: impl Fn(&CVector, usize) -> Complex64,
) -> Vec<Complex64> {
    if sigma2 > 0.0 && fresh {
        (0..grid.len())
            .map(|i| project(signal, i) + complex_normal(rng, sigma2))
            .collect()
    } else {
        let observed = if sigma2 > 0.0 {
            signal + complex_normal_vector(rng, signal.len(), sigma2)
        } else {
            signal.clone()
        };
        (0..grid.len()).map(|i| project(&observed, i)).collect()
    }
}

/// Base-station correlations `r_i = gamma_i^T y` of the user's uplink tone.
pub fn simulate_bs_tone_reception<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    grid: &DetectionGrid,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    noise.validate()?;
    if grid.n_elems() != channel.h.nrows() {
        return Err(Error::invalid(format!(
            "grid has {} elements but the base station has {}",
            grid.n_elems(),
            channel.h.nrows()
        )));
    }
    let y = channel.single_antenna_response() * Complex64::from(noise.tone_energy.sqrt());
    Ok(correlate(grid, &y, noise.sigma2_bs, noise.fresh_noise_per_correlation, rng, |v, i| {
        grid.vectors.column(i).dot(v)
    }))
}

/// Index of the largest `|r_i|`; ties go to the lowest index.
pub fn select_strongest(responses: &[Complex64]) -> Result<usize> {
    if responses.is_empty() {
        return Err(Error::invalid("no responses to select from"));
    }
    let mut best = 0;
    let mut best_pow = -1.0;
    for (i, r) in responses.iter().enumerate() {
        let p = r.norm_sqr();
        if !p.is_finite() {
            return Err(Error::invalid(format!("response {i} is not finite")));
        }
        if p > best_pow {
            best = i;
            best_pow = p;
        }
    }
    Ok(best)
}

/// User-side correlations `r_i = w_i^H (H^T f y + z)` of the downlink tone
/// sent through the base-station beam `f_col`.
pub fn simulate_ue_tone_reception<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    f_col: &CVector,
    grid: &DetectionGrid,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    noise.validate()?;
    if grid.n_elems() != channel.h.ncols() || f_col.len() != channel.h.nrows() {
        return Err(Error::invalid("beam or grid size does not match the channel"));
    }
    let y = channel.h.tr_mul(f_col) * Complex64::from(noise.tone_energy.sqrt());
    Ok(correlate(grid, &y, noise.sigma2_ms, noise.fresh_noise_per_correlation, rng, |v, i| {
        grid.vectors.column(i).dotc(v)
    }))
}

/// Runs base-station then user training for every user on the given grids.
pub fn train_beamformers_on<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    bs_grid: &DetectionGrid,
    ue_grid: &DetectionGrid,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<AnalogBeamformers> {
    let n = channels.len();
    if n == 0 {
        return Err(Error::invalid("no users to train"));
    }
    let mut f_rf = CMatrix::zeros(bs_grid.n_elems(), n);
    let mut q_rf = CMatrix::zeros(ue_grid.n_elems(), n);
    let mut bs_grid_idx = Vec::with_capacity(n);
    let mut ue_grid_idx = Vec::with_capacity(n);
    for (k, ch) in channels.iter().enumerate() {
        let r_bs = simulate_bs_tone_reception(ch, bs_grid, noise, rng)?;
        let i_bs = select_strongest(&r_bs)?;
        let gamma = bs_grid.column(i_bs);
        let r_ue = simulate_ue_tone_reception(ch, &gamma, ue_grid, noise, rng)?;
        let i_ue = select_strongest(&r_ue)?;
        f_rf.set_column(k, &gamma);
        q_rf.set_column(k, &ue_grid.vectors.column(i_ue));
        bs_grid_idx.push(i_bs);
        ue_grid_idx.push(i_ue);
    }
    Ok(AnalogBeamformers {
        f_rf,
        q_rf,
        bs_angles: bs_grid_idx.iter().map(|&i| bs_grid.angles[i]).collect(),
        ue_angles: ue_grid_idx.iter().map(|&i| ue_grid.angles[i]).collect(),
        bs_grid_idx,
        ue_grid_idx,
    })
}

/// [`train_beamformers_on`] with the default grid sizes for `dims`.
pub fn train_beamformers<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    dims: &SystemDims,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<AnalogBeamformers> {
    dims.validate()?;
    if channels.len() != dims.users {
        return Err(Error::invalid(format!(
            "expected {} channels, got {}",
            dims.users,
            channels.len()
        )));
    }
    if channels
        .iter()
        .any(|c| c.h.shape() != (dims.bs_antennas, dims.ue_antennas))
    {
        return Err(Error::invalid("channel shape does not match the system dimensions"));
    }
    let bs_grid = build_detection_grid(
        default_grid_size(dims.bs_antennas).max(2),
        dims.bs_antennas,
        dims.spacing_ratio,
    )?;
    let ue_grid = build_detection_grid(
        default_grid_size(dims.ue_antennas).max(2),
        dims.ue_antennas,
        dims.spacing_ratio,
    )?;
    train_beamformers_on(channels, &bs_grid, &ue_grid, noise, rng)
}
