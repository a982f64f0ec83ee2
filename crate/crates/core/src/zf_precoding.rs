//! Digital zero forcing on the equivalent channel, downlink SINR and the
//! closed-form rate bounds for the hybrid and fully digital systems.
//!
//! Rates are evaluated from SINR expressions; downlink symbols are never
//! sampled.

use crate::array_channel::{rician_weights, ChannelRealization, SystemDims};
use crate::linalg::{frobenius_sq, invert_hermitian, trace_re, MAX_GRAM_CONDITION};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone)]
pub struct ZfPrecoder {
    /// `W = H^* (H^T H^*)^{-1}`, column `k` serves user `k`.
    pub w: CMatrix,
    /// `1 / sqrt(tr(W W^H))`.
    pub beta: f64,
    /// Condition number of the Gram matrix `H^T H^*`.
    pub gram_condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub per_user_rate: Vec<f64>,
    pub mean_rate: f64,
    pub snr: f64,
    pub label: String,
}

/// `K = H^T H^*`, symmetrized so round-off never breaks Hermitian structure.
pub fn gram(h_eq: &CMatrix) -> CMatrix {
    let k = h_eq.transpose() * h_eq.map(|z| z.conj());
    (&k + k.adjoint()) * crate::Complex64::from(0.5)
}

pub fn zf_precoder(h_eq: &CMatrix) -> Result<ZfPrecoder> {
    zf_precoder_capped(h_eq, MAX_GRAM_CONDITION)
}

pub fn zf_precoder_capped(h_eq: &CMatrix, max_condition: f64) -> Result<ZfPrecoder> {
    if !h_eq.is_square() || h_eq.nrows() == 0 {
        return Err(Error::invalid("equivalent channel must be a non-empty square matrix"));
    }
    let (k_inv, gram_condition) = invert_hermitian(&gram(h_eq), max_condition)?;
    let w = h_eq.map(|z| z.conj()) * k_inv;
    let beta = 1.0 / frobenius_sq(&w).sqrt();
    Ok(ZfPrecoder { w, beta, gram_condition })
}

/// Per-user SINR of the downlink through the true channel `h_eq_true` with a
/// (possibly mismatched) precoder; `snr = E_s / sigma_MS^2`.
pub fn downlink_sinr(h_eq_true: &CMatrix, precoder: &ZfPrecoder, snr: f64) -> Result<Vec<f64>> {
    if h_eq_true.nrows() != precoder.w.nrows() || h_eq_true.ncols() != precoder.w.ncols() {
        return Err(Error::invalid("precoder does not match the channel"));
    }
    let g = h_eq_true.transpose() * &precoder.w;
    let b2 = precoder.beta * precoder.beta * snr;
    Ok((0..g.nrows())
        .map(|k| {
            let signal = g[(k, k)].norm_sqr();
            let interference: f64 = (0..g.ncols()).filter(|&j| j != k).map(|j| g[(k, j)].norm_sqr()).sum();
            b2 * signal / (b2 * interference + 1.0)
        })
        .collect())
}

/// `log2(1 + SINR)` per user plus the user mean.
pub fn simulated_rate(sinr: &[f64], snr: f64, label: &str) -> Result<RateResult> {
    if sinr.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("SINR values must be finite and nonnegative"));
    }
    let per_user_rate: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
    let mean_rate = if per_user_rate.is_empty() {
        0.0
    } else {
        per_user_rate.iter().sum::<f64>() / per_user_rate.len() as f64
    };
    Ok(RateResult {
        per_user_rate,
        mean_rate,
        snr,
        label: label.to_string(),
    })
}

/// Perfect-CSI hybrid rate: ZF on `h_eq`, evaluated on the same channel.
pub fn hybrid_rate(h_eq: &CMatrix, snr: f64) -> Result<RateResult> {
    let pre = zf_precoder(h_eq)?;
    simulated_rate(&downlink_sinr(h_eq, &pre, snr)?, snr, "hybrid")
}

fn power_split(kappa: f64) -> Result<(f64, f64)> {
    let (a, b) = rician_weights(kappa)?;
    Ok((a * a, b * b))
}

/// `log2{1 + [(k/(k+1)) M P |F^H F|_F^2 + N^2/(k+1)] snr / N^2}`.
pub fn hybrid_rate_upper_bound(f_rf: &CMatrix, kappa: f64, dims: &SystemDims, snr: f64) -> Result<f64> {
    let (los, nlos) = power_split(kappa)?;
    let n2 = (dims.users * dims.users) as f64;
    let ff = frobenius_sq(&(f_rf.adjoint() * f_rf));
    Ok((1.0 + (los * dims.array_gain() * ff + nlos * n2) * snr / n2).log2())
}

/// Large-array form of [`hybrid_rate_upper_bound`] with `F^H F = I`.
pub fn corollary1_rate(kappa: f64, dims: &SystemDims, snr: f64) -> Result<f64> {
    let (los, nlos) = power_split(kappa)?;
    Ok((1.0 + (los * dims.array_gain() / dims.users as f64 + nlos) * snr).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullyDigitalBounds {
    /// `log2(1 + P snr / tr(W W^H))` for this realization.
    pub simulated: f64,
    /// `log2(1 + (P/N^2) tr(H^H H) snr)`.
    pub upper: f64,
    /// `log2(1 + (M P / N) snr)`.
    pub asymptotic: f64,
}

/// Fully digital baseline with perfect CSI. User `k`'s base-station channel
/// row is the first column of `H_k` (the response seen from the user's
/// reference antenna).
pub fn fully_digital_bounds(channels: &[ChannelRealization], dims: &SystemDims, snr: f64) -> Result<FullyDigitalBounds> {
    let n = channels.len();
    if n == 0 || n > dims.bs_antennas {
        return Err(Error::invalid(format!("need 1..=M users, got {n}")));
    }
    // H_FD: M x N, column k = h_BS,k
    let mut h_fd = CMatrix::zeros(dims.bs_antennas, n);
    for (k, ch) in channels.iter().enumerate() {
        if ch.h.nrows() != dims.bs_antennas {
            return Err(Error::invalid("channel does not match the system dimensions"));
        }
        h_fd.set_column(k, &ch.single_antenna_response());
    }
    let pre = zf_precoder_rect(&h_fd)?;
    let p = dims.ue_antennas as f64;
    let simulated = (1.0 + p * snr / frobenius_sq(&pre)).log2();
    let upper = (1.0 + p / (n * n) as f64 * frobenius_sq(&h_fd) * snr).log2();
    Ok(FullyDigitalBounds {
        simulated,
        upper,
        asymptotic: fully_digital_asymptote(dims, snr),
    })
}

/// ZF precoder `H^* (H^T H^*)^{-1}` for a tall `M x N` channel.
fn zf_precoder_rect(h: &CMatrix) -> Result<CMatrix> {
    let (k_inv, _) = invert_hermitian(&gram(h), MAX_GRAM_CONDITION)?;
    Ok(h.map(|z| z.conj()) * k_inv)
}

pub fn fully_digital_asymptote(dims: &SystemDims, snr: f64) -> f64 {
    (1.0 + dims.array_gain() / dims.users as f64 * snr).log2()
}

/// High-SNR, large-array gap `log2(k/(k+1))` between hybrid and fully
/// digital upper bounds.
pub fn corollary3_gap(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::invalid(format!("gap needs a positive Rician factor, got {kappa}")));
    }
    if kappa.is_infinite() {
        return Ok(0.0);
    }
    Ok((kappa / (kappa + 1.0)).log2())
}

/// `tr(K^{-1})` through the same guarded inverse the precoder uses.
pub fn gram_inverse_trace(h_eq: &CMatrix) -> Result<f64> {
    let (k_inv, _) = invert_hermitian(&gram(h_eq), MAX_GRAM_CONDITION)?;
    Ok(trace_re(&k_inv))
}
