//! Uplink pilot phase: every user sends an orthogonal pilot through its analog
//! beam, the base station receives through `F_RF` and least-squares estimates
//! the `N x N` equivalent channel.
//!
//! Convention: `H_eq[k, i] = f_k^T H_i conj(w_i)`, so row `k` of `H_eq^T` is
//! user `k`'s downlink channel `w_k^H H_k^T F_RF`. The received block is
//! `S = H_eq Psi^T + F_RF^T Z` with one row per RF chain and one column per
//! pilot symbol.

use std::f64::consts::PI;

use rand::Rng;

use crate::aoa_beam_training::{AnalogBeamformers, NoiseConfig};
use crate::array_channel::{ChannelRealization, SystemDims};
use crate::linalg::{cis, frobenius_sq};
use crate::rng::complex_normal_matrix;
use crate::{CMatrix, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PilotFamily {
    #[default]
    Dft,
    /// Sylvester construction; `N` must be a power of two.
    Hadamard,
}

/// Square pilot block, column `i` is user `i`'s pilot; `Psi^H Psi = E_P I`.
#[derive(Debug, Clone)]
pub struct PilotMatrix {
    pub psi: CMatrix,
    pub pilot_energy: f64,
}

#[derive(Debug, Clone)]
pub struct EquivalentChannel {
    /// `N x N`, stored as `H_eq` (see the module docs).
    pub h_eq: CMatrix,
    pub is_estimate: bool,
    /// `(M, P, N)` of the system it came from.
    pub source_dims: (usize, usize, usize),
}

impl EquivalentChannel {
    /// `H_eq^T`: row `k` is user `k`'s effective downlink channel.
    pub fn downlink(&self) -> CMatrix {
        self.h_eq.transpose()
    }
}

pub fn generate_orthogonal_pilots(n: usize, pilot_energy: f64) -> Result<PilotMatrix> {
    generate_pilots(n, pilot_energy, PilotFamily::Dft)
}

pub fn generate_pilots(n: usize, pilot_energy: f64, family: PilotFamily) -> Result<PilotMatrix> {
    if n == 0 {
        return Err(Error::invalid("pilot length must be at least 1"));
    }
    if !(pilot_energy > 0.0 && pilot_energy.is_finite()) {
        return Err(Error::invalid(format!("pilot energy must be positive, got {pilot_energy}")));
    }
    let amp = (pilot_energy / n as f64).sqrt();
    let psi = match family {
        PilotFamily::Dft => CMatrix::from_fn(n, n, |r, c| {
            cis(-2.0 * PI * ((r * c) % n) as f64 / n as f64) * amp
        }),
        PilotFamily::Hadamard => {
            if !n.is_power_of_two() {
                return Err(Error::invalid(format!("Hadamard pilots need a power-of-two length, got {n}")));
            }
            // H[r, c] = (-1)^popcount(r & c)
            CMatrix::from_fn(n, n, |r, c| {
                let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * amp, 0.0)
            })
        }
    };
    Ok(PilotMatrix { psi, pilot_energy })
}

fn check_shapes(channels: &[ChannelRealization], bs: &CMatrix, ue: &CMatrix, pilots: &PilotMatrix) -> Result<()> {
    let n = channels.len();
    if n == 0 {
        return Err(Error::invalid("no users"));
    }
    let (m, p) = channels[0].h.shape();
    if channels.iter().any(|c| c.h.shape() != (m, p)) {
        return Err(Error::invalid("users have inconsistent channel shapes"));
    }
    if bs.shape() != (m, n) || ue.shape() != (p, n) {
        return Err(Error::invalid(format!(
            "beam shapes {:?}/{:?} do not match M={m}, P={p}, N={n}",
            bs.shape(),
            ue.shape()
        )));
    }
    if pilots.psi.shape() != (n, n) {
        return Err(Error::invalid(format!("pilot block must be {n}x{n}")));
    }
    Ok(())
}

/// `H_eq[k, i] = bs[:, k]^T H_i ue_tx[:, i]` for arbitrary receive beams and
/// transmit vectors.
pub fn equivalent_channel_with(channels: &[ChannelRealization], bs: &CMatrix, ue_tx: &CMatrix) -> CMatrix {
    let n = channels.len();
    let mut h_eq = CMatrix::zeros(bs.ncols(), n);
    for (i, ch) in channels.iter().enumerate() {
        let col = bs.tr_mul(&(&ch.h * ue_tx.column(i)));
        h_eq.set_column(i, &col);
    }
    h_eq
}

/// Pilot reception with explicit per-chain receive beams (`M x N`) and
/// per-user transmit vectors (`P x N`).
pub fn pilot_reception_with<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    bs_rx: &CMatrix,
    ue_tx: &CMatrix,
    pilots: &PilotMatrix,
    sigma2_bs: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    check_shapes(channels, bs_rx, ue_tx, pilots)?;
    if !(sigma2_bs >= 0.0) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let mut s = equivalent_channel_with(channels, bs_rx, ue_tx) * pilots.psi.transpose();
    if sigma2_bs > 0.0 {
        let z = complex_normal_matrix(rng, bs_rx.nrows(), pilots.psi.nrows(), sigma2_bs);
        s += bs_rx.tr_mul(&z);
    }
    Ok(s)
}

/// Received pilot block `S` (rows: RF chains, columns: pilot symbols).
pub fn uplink_pilot_reception<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    beams: &AnalogBeamformers,
    pilots: &PilotMatrix,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<CMatrix> {
    noise.validate()?;
    let ue_tx = beams.q_rf.map(|z| z.conj());
    pilot_reception_with(channels, &beams.f_rf, &ue_tx, pilots, noise.sigma2_bs, rng)
}

/// Least-squares estimate `H_eq^T = Psi^H S^T / E_P`.
pub fn ls_estimate(s: &CMatrix, pilots: &PilotMatrix, dims: &SystemDims) -> Result<EquivalentChannel> {
    if !(pilots.pilot_energy > 0.0) {
        return Err(Error::invalid("pilot energy must be positive"));
    }
    if s.ncols() != pilots.psi.nrows() || pilots.psi.ncols() != s.nrows() {
        return Err(Error::invalid("received block does not match the pilot length"));
    }
    let h_eq = s * pilots.psi.map(|z| z.conj()) / Complex64::from(pilots.pilot_energy);
    Ok(EquivalentChannel {
        h_eq,
        is_estimate: true,
        source_dims: (dims.bs_antennas, dims.ue_antennas, dims.users),
    })
}

pub fn true_equivalent_channel(
    channels: &[ChannelRealization],
    beams: &AnalogBeamformers,
    dims: &SystemDims,
) -> Result<EquivalentChannel> {
    let n = channels.len();
    if beams.f_rf.ncols() != n || beams.q_rf.ncols() != n {
        return Err(Error::invalid("beamformers do not match the user count"));
    }
    if channels.iter().any(|c| c.h.shape() != (beams.f_rf.nrows(), beams.q_rf.nrows())) {
        return Err(Error::invalid("channel shape does not match the beamformers"));
    }
    let ue_tx = beams.q_rf.map(|z| z.conj());
    Ok(EquivalentChannel {
        h_eq: equivalent_channel_with(channels, &beams.f_rf, &ue_tx),
        is_estimate: false,
        source_dims: (dims.bs_antennas, dims.ue_antennas, dims.users),
    })
}

/// Normalized MSE of user `k`: `(1/N) |row_k(H^T_est - H^T)|^2 / (M P)`.
pub fn user_normalized_mse(estimate: &EquivalentChannel, truth: &EquivalentChannel, dims: &SystemDims, k: usize) -> f64 {
    let n = truth.h_eq.ncols() as f64;
    let err = (estimate.h_eq.column(k) - truth.h_eq.column(k)).norm_squared();
    err / (n * dims.array_gain())
}

/// [`user_normalized_mse`] averaged over all users.
pub fn normalized_mse(estimate: &EquivalentChannel, truth: &EquivalentChannel, dims: &SystemDims) -> f64 {
    let n = truth.h_eq.ncols() as f64;
    frobenius_sq(&(&estimate.h_eq - &truth.h_eq)) / (n * n * dims.array_gain())
}

/// `sigma^2 / (E_P M P)`.
pub fn closed_form_mse(sigma2_bs: f64, pilot_energy: f64, m: usize, p: usize) -> f64 {
    sigma2_bs / (pilot_energy * m as f64 * p as f64)
}
