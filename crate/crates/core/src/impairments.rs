//! Hardware impairments and imperfect CSI.
//!
//! * phase-shifter errors: unit-modulus diagonals `e^{j d}`, `d ~ U[-a, a]`
//!   per element;
//! * beam misalignment from AoA estimation errors: one real Gaussian angle
//!   error per beam, applied as a diagonal phase ramp;
//! * CSI errors: additive complex Gaussian error on the equivalent channel.
//!
//! Closed forms use the power-loss coefficient `xi` (beam misalignment) and
//! `xi_hat = (sin a / a)^2 (sin b / b)^2 xi`.

use std::f64::consts::PI;

use rand::Rng;

use crate::aoa_beam_training::AnalogBeamformers;
use crate::array_channel::{rician_weights, ChannelRealization, SystemDims};
use crate::linalg::{cis, invert, invert_hermitian, trace_re, MAX_GRAM_CONDITION};
use crate::pilot_equalization::{equivalent_channel_with, ls_estimate, pilot_reception_with, EquivalentChannel, PilotMatrix};
use crate::rng::{complex_normal_matrix, real_normal, substream, SimRng};
use crate::zf_precoding::{downlink_sinr, gram, zf_precoder};
use crate::{CMatrix, CVector, Error, Result};

/// How an angle error `dt` turns into a diagonal phase ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamErrorModel {
    /// `e^{j 2 pi m s (cos(t + dt) - cos t)}`: steers the beam from its
    /// nominal angle `t` to `t + dt`; identity when `dt = 0`.
    #[default]
    AngularOffset,
    /// `e^{j 2 pi m s cos(dt)}` as the matrix is usually written; not the
    /// identity at `dt = 0`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerLossMode {
    /// Half-power rule: `xi = 0.5` while the AoA-error variance is at most
    /// half the beamwidth.
    HalfPower,
    /// Average `|g(t)^H g(t + dt)|^2` over `draws` angle errors.
    MonteCarlo { draws: usize, reference_angle: f64 },
}

impl PowerLossMode {
    pub fn monte_carlo() -> Self {
        PowerLossMode::MonteCarlo {
            draws: 100_000,
            reference_angle: PI / 2.0,
        }
    }
}

/// Scale of injected CSI errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsiErrorScale {
    /// Entries of the error have variance `delta2`.
    #[default]
    Absolute,
    /// Entries have variance `delta2 * M * P`, i.e. the `1/sqrt(MP)`-scaled
    /// error has variance `delta2`.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentProfile {
    /// Max user phase error, radians.
    pub a: f64,
    /// Max base-station phase error, radians.
    pub b: f64,
    pub var_aoa_bs: f64,
    pub var_aoa_ms: f64,
    pub delta2: f64,
    pub xi: f64,
    pub xi_hat: f64,
    pub beam_error_model: BeamErrorModel,
    pub csi_error_scale: CsiErrorScale,
}

impl ImpairmentProfile {
    pub fn new(a: f64, b: f64, var_aoa_bs: f64, var_aoa_ms: f64, delta2: f64, xi: f64) -> Result<Self> {
        let p = ImpairmentProfile {
            a,
            b,
            var_aoa_bs,
            var_aoa_ms,
            delta2,
            xi,
            xi_hat: xi_hat(a, b, xi),
            beam_error_model: BeamErrorModel::default(),
            csi_error_scale: CsiErrorScale::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ideal() -> Self {
        ImpairmentProfile {
            a: 0.0,
            b: 0.0,
            var_aoa_bs: 0.0,
            var_aoa_ms: 0.0,
            delta2: 0.0,
            xi: 1.0,
            xi_hat: 1.0,
            beam_error_model: BeamErrorModel::default(),
            csi_error_scale: CsiErrorScale::default(),
        }
    }

    /// The same profile with hardware errors removed, keeping CSI errors.
    pub fn without_hardware(&self) -> Self {
        ImpairmentProfile {
            delta2: self.delta2,
            beam_error_model: self.beam_error_model,
            csi_error_scale: self.csi_error_scale,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [("a", self.a), ("b", self.b), ("var_aoa_bs", self.var_aoa_bs), ("var_aoa_ms", self.var_aoa_ms), ("delta2", self.delta2)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::invalid(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        if self.xi_hat > self.xi {
            return Err(Error::invalid("xi_hat cannot exceed xi"));
        }
        Ok(())
    }

    pub fn has_hardware_errors(&self) -> bool {
        self.a > 0.0 || self.b > 0.0 || self.var_aoa_bs > 0.0 || self.var_aoa_ms > 0.0
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn xi_hat(a: f64, b: f64, xi: f64) -> f64 {
    sinc(a).powi(2) * sinc(b).powi(2) * xi
}

/// Diagonal of a phase-error matrix.
pub fn phase_error_diagonal<R: Rng + ?Sized>(rng: &mut R, half_width: f64, size: usize) -> Result<CVector> {
    if !(half_width >= 0.0 && half_width.is_finite()) {
        return Err(Error::invalid(format!("phase half-width must be >= 0, got {half_width}")));
    }
    if half_width == 0.0 {
        return Ok(CVector::from_element(size, cis(0.0)));
    }
    Ok(CVector::from_fn(size, |_, _| cis(rng.random_range(-half_width..=half_width))))
}

pub fn draw_phase_error_matrix<R: Rng + ?Sized>(rng: &mut R, half_width: f64, size: usize) -> Result<CMatrix> {
    Ok(CMatrix::from_diagonal(&phase_error_diagonal(rng, half_width, size)?))
}

/// Phase ramp for an angle error `dt` on a beam nominally pointed at
/// `reference` (ignored by the literal model).
pub fn beam_error_diagonal(dt: f64, reference: f64, n_elems: usize, spacing_ratio: f64, model: BeamErrorModel) -> CVector {
    let shift = match model {
        BeamErrorModel::Literal => dt.cos(),
        BeamErrorModel::AngularOffset => (reference + dt).cos() - reference.cos(),
    };
    CVector::from_fn(n_elems, |m, _| cis(2.0 * PI * m as f64 * spacing_ratio * shift))
}

/// Diagonal beam-error matrix with one Gaussian angle error of variance
/// `var_aoa`.
pub fn draw_beamforming_error_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    var_aoa: f64,
    reference: f64,
    n_elems: usize,
    spacing_ratio: f64,
    model: BeamErrorModel,
) -> Result<CMatrix> {
    if !(var_aoa >= 0.0 && var_aoa.is_finite()) {
        return Err(Error::invalid(format!("AoA error variance must be >= 0, got {var_aoa}")));
    }
    let dt = real_normal(rng, var_aoa);
    Ok(CMatrix::from_diagonal(&beam_error_diagonal(dt, reference, n_elems, spacing_ratio, model)))
}

/// Half-power beamwidth `1.782 / n`, radians.
pub fn hpbw(n_elems: usize) -> f64 {
    1.782 / n_elems as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLoss {
    pub xi: f64,
    /// Set when the requested mode could not be honoured.
    pub warning: Option<String>,
}

/// `|g(t)^H g(t + dt)|^2` for unit-norm array responses.
fn alignment_gain(t: f64, dt: f64, n: usize, spacing_ratio: f64) -> f64 {
    let x = 2.0 * PI * spacing_ratio * ((t + dt).cos() - t.cos());
    let sum: crate::Complex64 = (0..n).map(|m| cis(m as f64 * x)).sum();
    sum.norm_sqr() / (n * n) as f64
}

pub fn power_loss_coefficient<R: Rng + ?Sized>(
    var_aoa: f64,
    n_elems: usize,
    spacing_ratio: f64,
    mode: PowerLossMode,
    rng: &mut R,
) -> Result<PowerLoss> {
    if n_elems < 2 {
        return Err(Error::invalid("power loss needs at least two elements"));
    }
    if !(var_aoa >= 0.0 && var_aoa.is_finite()) {
        return Err(Error::invalid(format!("AoA error variance must be >= 0, got {var_aoa}")));
    }
    match mode {
        PowerLossMode::HalfPower if var_aoa <= hpbw(n_elems) / 2.0 => Ok(PowerLoss { xi: 0.5, warning: None }),
        PowerLossMode::HalfPower => {
            let mut out = power_loss_coefficient(var_aoa, n_elems, spacing_ratio, PowerLossMode::monte_carlo(), rng)?;
            out.warning = Some(format!(
                "AoA error variance {var_aoa:.4e} exceeds half the beamwidth ({:.4e}); used Monte Carlo",
                hpbw(n_elems) / 2.0
            ));
            Ok(out)
        }
        PowerLossMode::MonteCarlo { draws, reference_angle } => {
            if var_aoa == 0.0 {
                return Ok(PowerLoss { xi: 1.0, warning: None });
            }
            let draws = draws.max(1);
            let sum: f64 = (0..draws)
                .map(|_| alignment_gain(reference_angle, real_normal(rng, var_aoa), n_elems, spacing_ratio))
                .sum();
            Ok(PowerLoss { xi: (sum / draws as f64).clamp(f64::MIN_POSITIVE, 1.0), warning: None })
        }
    }
}

/// `log2{1 + [(k/(k+1)) (MP/N) coef + 1/(k+1)] snr}`.
pub fn rate_with_beamforming_errors(kappa: f64, dims: &SystemDims, coef: f64, snr: f64) -> Result<f64> {
    if !(coef > 0.0 && coef <= 1.0) {
        return Err(Error::invalid(format!("power-loss coefficient must lie in (0, 1], got {coef}")));
    }
    let (a, b) = rician_weights(kappa)?;
    Ok((1.0 + (a * a * dims.array_gain() / dims.users as f64 * coef + b * b) * snr).log2())
}

/// Independent random streams for each impairment so toggling one never
/// shifts another's draws.
#[derive(Debug, Clone)]
pub struct ImpairmentStreams {
    pub phase_ms: SimRng,
    pub phase_bs: SimRng,
    pub aoa_bs: SimRng,
    pub aoa_ms: SimRng,
    pub noise: SimRng,
    pub csi: SimRng,
}

impl ImpairmentStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        ImpairmentStreams {
            phase_ms: substream(seed, trial, "impair.phase_ms"),
            phase_bs: substream(seed, trial, "impair.phase_bs"),
            aoa_bs: substream(seed, trial, "impair.aoa_bs"),
            aoa_ms: substream(seed, trial, "impair.aoa_ms"),
            noise: substream(seed, trial, "impair.noise"),
            csi: substream(seed, trial, "impair.csi"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImpairedReception {
    pub s: CMatrix,
    pub estimate: EquivalentChannel,
    /// Equivalent channel through the impaired beams, without noise.
    pub impaired_truth: CMatrix,
}

/// Pilot phase through impaired beams: chain `k` receives with
/// `D_k X_k f_k`, user `i` transmits with `L_i T_i conj(w_i)`. The errors are
/// part of what the estimator sees, so they end up inside the estimate.
pub fn impaired_pilot_reception(
    channels: &[ChannelRealization],
    beams: &AnalogBeamformers,
    pilots: &PilotMatrix,
    profile: &ImpairmentProfile,
    sigma2_bs: f64,
    dims: &SystemDims,
    streams: &mut ImpairmentStreams,
) -> Result<ImpairedReception> {
    profile.validate()?;
    let n = channels.len();
    let (m, p) = (beams.f_rf.nrows(), beams.q_rf.nrows());
    let s_ratio = dims.spacing_ratio;
    let mut bs_rx = beams.f_rf.clone();
    let mut ue_tx = beams.q_rf.map(|z| z.conj());
    for k in 0..n {
        let mut d = phase_error_diagonal(&mut streams.phase_bs, profile.b, m)?;
        if profile.var_aoa_bs > 0.0 {
            let dt = real_normal(&mut streams.aoa_bs, profile.var_aoa_bs);
            d.component_mul_assign(&beam_error_diagonal(dt, beams.bs_angles[k], m, s_ratio, profile.beam_error_model));
        }
        let mut col = bs_rx.column_mut(k);
        col.component_mul_assign(&d);

        let mut u = phase_error_diagonal(&mut streams.phase_ms, profile.a, p)?;
        if profile.var_aoa_ms > 0.0 {
            let dt = real_normal(&mut streams.aoa_ms, profile.var_aoa_ms);
            let mut ramp = beam_error_diagonal(dt, beams.ue_angles[k], p, s_ratio, profile.beam_error_model);
            if profile.beam_error_model == BeamErrorModel::AngularOffset {
                // the user transmits with the conjugate vector
                ramp.iter_mut().for_each(|z| *z = z.conj());
            }
            u.component_mul_assign(&ramp);
        }
        let mut col = ue_tx.column_mut(k);
        col.component_mul_assign(&u);
    }
    let s = pilot_reception_with(channels, &bs_rx, &ue_tx, pilots, sigma2_bs, &mut streams.noise)?;
    let estimate = ls_estimate(&s, pilots, dims)?;
    Ok(ImpairedReception {
        s,
        estimate,
        impaired_truth: equivalent_channel_with(channels, &bs_rx, &ue_tx),
    })
}

#[derive(Debug, Clone)]
pub struct PerturbedEquivalentChannel {
    pub h_eq_hat: CMatrix,
    pub h_eq_tilde: CMatrix,
    /// `K = H_hat^T conj(H_hat)`.
    pub gram: CMatrix,
    /// Diagonal of `K^{-1}`; infinite when `K` cannot be inverted.
    pub eta: Vec<f64>,
}

pub fn inject_csi_error<R: Rng + ?Sized>(
    h_eq_hat: &CMatrix,
    delta2: f64,
    dims: &SystemDims,
    scale: CsiErrorScale,
    rng: &mut R,
) -> Result<PerturbedEquivalentChannel> {
    if !(delta2 >= 0.0 && delta2.is_finite()) {
        return Err(Error::invalid(format!("CSI error variance must be >= 0, got {delta2}")));
    }
    let var = match scale {
        CsiErrorScale::Absolute => delta2,
        CsiErrorScale::Normalized => delta2 * dims.array_gain(),
    };
    let h_eq_tilde = if delta2 > 0.0 {
        h_eq_hat + complex_normal_matrix(rng, h_eq_hat.nrows(), h_eq_hat.ncols(), var)
    } else {
        h_eq_hat.clone()
    };
    let k = gram(h_eq_hat);
    let eta = match invert_hermitian(&k, MAX_GRAM_CONDITION) {
        Ok((inv, _)) => inv.diagonal().iter().map(|z| z.re).collect(),
        Err(_) => vec![f64::INFINITY; k.nrows()],
    };
    Ok(PerturbedEquivalentChannel {
        h_eq_hat: h_eq_hat.clone(),
        h_eq_tilde,
        gram: k,
        eta,
    })
}

/// High-SNR rate of one user under CSI errors, from `eta_kk`, `tr(K^{-1})`
/// and the user count. Returns `+inf` when the error term vanishes.
pub fn theorem2_rate_scalar(n_users: usize, eta_kk: f64, trace_k_inv: f64, delta2: f64) -> f64 {
    if delta2 == 0.0 {
        return f64::INFINITY;
    }
    let s = (1.0 + delta2).sqrt();
    let n = n_users as f64;
    let bracket = (s - 1.0).powi(2) - 2.0 * s * (s - 1.0) * delta2 * n * eta_kk + s * (2.0 - s) * delta2 * trace_k_inv;
    if bracket <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 + 1.0 / bracket).log2()
}

/// Per-user high-SNR rates for Gram matrix `K`.
pub fn theorem2_rate(gram: &CMatrix, delta2: f64) -> Result<Vec<f64>> {
    if !(delta2 >= 0.0) {
        return Err(Error::invalid("CSI error variance must be >= 0"));
    }
    let (inv, _) = invert_hermitian(gram, MAX_GRAM_CONDITION)?;
    let tr = trace_re(&inv);
    Ok((0..gram.nrows()).map(|k| theorem2_rate_scalar(gram.nrows(), inv[(k, k)].re, tr, delta2)).collect())
}

/// [`theorem2_rate`] for the large-array Gram `xi_hat M P (k/(k+1)) I`.
pub fn corollary4_rate(delta2: f64, xi_hat: f64, kappa: f64, dims: &SystemDims) -> Result<f64> {
    if !(xi_hat > 0.0 && xi_hat <= 1.0) {
        return Err(Error::invalid(format!("xi_hat must lie in (0, 1], got {xi_hat}")));
    }
    let (a, _) = rician_weights(kappa)?;
    let c = xi_hat * dims.array_gain() * a * a;
    if !(c > 0.0) {
        return Err(Error::invalid("Gram scale vanishes for a zero Rician factor"));
    }
    let n = dims.users as f64;
    Ok(theorem2_rate_scalar(dims.users, 1.0 / c, n / c, delta2))
}

/// `log2(1 / xi_hat)`.
pub fn corollary5_gap(xi_hat: f64) -> Result<f64> {
    if !(xi_hat > 0.0 && xi_hat <= 1.0) {
        return Err(Error::invalid(format!("xi_hat must lie in (0, 1], got {xi_hat}")));
    }
    Ok(-xi_hat.log2())
}

/// First-order approximation `K^{-1} - K^{-1} D K^{-1}` of `(K + D)^{-1}`.
pub fn first_order_inverse(gram: &CMatrix, perturbation: &CMatrix) -> Result<CMatrix> {
    if gram.shape() != perturbation.shape() {
        return Err(Error::invalid("perturbation shape differs from the matrix"));
    }
    let inv = invert(gram)?;
    Ok(&inv - &inv * perturbation * &inv)
}

/// ZF built on the erroneous channel, evaluated on the impaired truth.
pub fn simulated_rate_with_csi_errors(perturbed: &PerturbedEquivalentChannel, snr: f64) -> Result<Vec<f64>> {
    let pre = zf_precoder(&perturbed.h_eq_tilde)?;
    Ok(downlink_sinr(&perturbed.h_eq_hat, &pre, snr)?
        .into_iter()
        .map(|s| (1.0 + s).log2())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoa_beam_training::{train_beamformers, NoiseConfig};
    use crate::array_channel::RicianConfig;
    use crate::linalg::{frobenius_sq, hermitian_condition, identity};
    use crate::pilot_equalization::{generate_orthogonal_pilots, true_equivalent_channel, uplink_pilot_reception};
    use crate::rng::seeded;
    use crate::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn setup(seed: u64, dims: &SystemDims) -> (Vec<ChannelRealization>, AnalogBeamformers) {
        let mut rng = seeded(seed);
        let channels: Vec<_> = (0..dims.users)
            .map(|_| {
                let t = rng.random_range(0.0..=PI);
                let p = rng.random_range(0.0..=PI);
                ChannelRealization::draw(&mut rng, t, p, dims, &RicianConfig::iid(2.0)).unwrap()
            })
            .collect();
        let beams = train_beamformers(&channels, dims, &NoiseConfig::noiseless(1.0), &mut rng).unwrap();
        (channels, beams)
    }

    #[test]
    fn zero_half_width_is_identity() {
        let d = draw_phase_error_matrix(&mut seeded(1), 0.0, 5).unwrap();
        assert_eq!(d, identity(5));
        assert!(draw_phase_error_matrix(&mut seeded(1), -0.1, 5).is_err());
    }

    #[test]
    fn phase_error_mean_is_sinc() {
        let a = 3f64.to_radians();
        let d = phase_error_diagonal(&mut seeded(2), a, 1_000_000).unwrap();
        let mean: Complex64 = d.iter().sum::<Complex64>() / Complex64::from(1e6);
        assert!((mean - Complex64::from(a.sin() / a)).norm() < 1e-3);
        assert!((a.sin() / a - 0.99954).abs() < 1e-5);
    }

    #[test]
    fn beam_error_models_at_zero() {
        let lit = beam_error_diagonal(0.0, 1.0, 4, 0.5, BeamErrorModel::Literal);
        for m in 0..4 {
            assert!((lit[m] - cis(PI * m as f64)).norm() < 1e-12);
        }
        let off = beam_error_diagonal(0.0, 1.0, 4, 0.5, BeamErrorModel::AngularOffset);
        assert!(off.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let d = draw_beamforming_error_matrix(&mut seeded(0), 0.0, 0.3, 6, 0.5, BeamErrorModel::Literal).unwrap();
        assert!((d[(1, 1)] - cis(PI)).norm() < 1e-12);
    }

    #[test]
    fn offset_ramp_moves_grid_argmax() {
        use crate::aoa_beam_training::{build_detection_grid, select_strongest};
        let grid = build_detection_grid(40, 32, 0.5).unwrap();
        let i0 = 12;
        let dt = 0.15;
        let beam = grid.column(i0).component_mul(&beam_error_diagonal(dt, grid.angles[i0], 32, 0.5, BeamErrorModel::AngularOffset));
        // correlate the shifted beam against the conjugate grid
        let r: Vec<Complex64> = (0..grid.len()).map(|i| grid.vectors.column(i).dotc(&beam)).collect();
        let sel = select_strongest(&r).unwrap();
        assert_eq!(sel, grid.nearest_index(grid.angles[i0] + dt));
        assert_ne!(sel, i0);
    }

    #[test]
    fn hpbw_and_half_power() {
        assert!((hpbw(100) - 0.01782).abs() < 1e-15);
        let mut rng = seeded(0);
        let p = power_loss_coefficient(1.782 / 200.0, 100, 0.5, PowerLossMode::HalfPower, &mut rng).unwrap();
        assert_eq!(p.xi, 0.5);
        assert!(p.warning.is_none());
        let p = power_loss_coefficient(0.0, 100, 0.5, PowerLossMode::monte_carlo(), &mut rng).unwrap();
        assert_eq!(p.xi, 1.0);
        let p = power_loss_coefficient(0.05, 100, 0.5, PowerLossMode::HalfPower, &mut rng).unwrap();
        assert!(p.warning.is_some());
        assert!(p.xi > 0.0 && p.xi < 1.0);
    }

    #[test]
    fn beamforming_rate_examples() {
        let dims = SystemDims::new(100, 16, 4).unwrap();
        for &k in &[0.5, 2.0, 10.0] {
            let a = rate_with_beamforming_errors(k, &dims, 1.0, 3.0).unwrap();
            let b = crate::zf_precoding::corollary1_rate(k, &dims, 3.0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        let hi = 1e6;
        let gap = rate_with_beamforming_errors(2.0, &dims, 1.0, hi).unwrap() - rate_with_beamforming_errors(2.0, &dims, 0.5, hi).unwrap();
        assert!((gap - 1.0).abs() < 1e-2);
        let los = rate_with_beamforming_errors(f64::INFINITY, &dims, 0.3, 2.0).unwrap();
        assert!((los - (1.0 + 400.0 * 0.3 * 2.0f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn corollary5_examples() {
        assert_eq!(corollary5_gap(1.0).unwrap(), 0.0);
        assert!((corollary5_gap(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((corollary5_gap(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(corollary5_gap(0.0).is_err());
    }

    #[test]
    fn theorem2_examples() {
        assert_eq!(theorem2_rate_scalar(4, 0.1, 0.4, 0.0), f64::INFINITY);
        let dims = SystemDims::new(100, 8, 8).unwrap();
        let r = corollary4_rate(0.005, 1.0, 2.0, &dims).unwrap();
        // closed form written out independently
        let (d2, n, c) = (0.005f64, 8.0, 1.0 * 800.0 * 2.0 / 3.0);
        let s = (1.0 + d2).sqrt();
        let x = d2 * n / c;
        let want = (1.0 + 1.0 / ((s - 1.0).powi(2) - 2.0 * s * (s - 1.0) * x + s * (2.0 - s) * x)).log2();
        assert!((r - want).abs() < 1e-12);
        assert!((r - 13.6).abs() < 0.05, "{r}");

        let k = identity(8) * Complex64::from(c);
        let per_user = theorem2_rate(&k, 0.005).unwrap();
        assert!(per_user.iter().all(|v| ((v - r) / r).abs() < 1e-12));
    }

    #[test]
    fn csi_error_examples() {
        let dims = SystemDims::new(10, 4, 3).unwrap();
        let h = complex_normal_matrix(&mut seeded(1), 3, 3, 40.0);
        let p = inject_csi_error(&h, 0.0, &dims, CsiErrorScale::Absolute, &mut seeded(2)).unwrap();
        assert_eq!(p.h_eq_tilde, h);
        for scale in [CsiErrorScale::Absolute, CsiErrorScale::Normalized] {
            let mut rng = seeded(3);
            let draws = 12_000;
            let mut acc = 0.0;
            for _ in 0..draws {
                let p = inject_csi_error(&h, 0.02, &dims, scale, &mut rng).unwrap();
                acc += frobenius_sq(&(&p.h_eq_tilde - &h)) / 9.0;
            }
            let var = acc / draws as f64;
            let want = match scale {
                CsiErrorScale::Absolute => 0.02,
                CsiErrorScale::Normalized => 0.02 * 40.0,
            };
            assert!((var / want - 1.0).abs() < 0.02, "{scale:?}: {var}");
        }
        // eta is the diagonal of K^{-1}
        let kinv = invert(&p.gram).unwrap();
        for k in 0..3 {
            assert!((p.eta[k] - kinv[(k, k)].re).abs() < 1e-12 * p.eta[k]);
        }
    }

    #[test]
    fn csi_rates() {
        let h = complex_normal_matrix(&mut seeded(4), 4, 4, 50.0);
        let dims = SystemDims::new(10, 5, 4).unwrap();
        let clean = inject_csi_error(&h, 0.0, &dims, CsiErrorScale::Absolute, &mut seeded(0)).unwrap();
        let a = simulated_rate_with_csi_errors(&clean, 100.0).unwrap();
        let b = crate::zf_precoding::hybrid_rate(&h, 100.0).unwrap().per_user_rate;
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
        let noisy = inject_csi_error(&h, 0.01, &dims, CsiErrorScale::Absolute, &mut seeded(0)).unwrap();
        let pre = zf_precoder(&noisy.h_eq_tilde).unwrap();
        let g = h.transpose() * pre.w;
        assert!(g[(0, 1)].norm_sqr() > 0.0);
    }

    #[test]
    fn first_order_inverse_examples() {
        let k = identity(3) * Complex64::from(2.0);
        let z = CMatrix::zeros(3, 3);
        assert!(frobenius_sq(&(first_order_inverse(&k, &z).unwrap() - identity(3) * Complex64::from(0.5))) < 1e-30);
        let eps = 1e-3;
        let approx = first_order_inverse(&identity(2), &(identity(2) * Complex64::from(eps))).unwrap();
        let err = (approx[(0, 0)].re - 1.0 / (1.0 + eps)).abs();
        assert!((approx[(0, 0)].re - (1.0 - eps)).abs() < 1e-15);
        assert!(err < 2.0 * eps * eps);
        assert!(first_order_inverse(&CMatrix::zeros(2, 2), &CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn ideal_profile_matches_plain_reception() {
        let dims = SystemDims::new(16, 4, 3).unwrap();
        let (channels, beams) = setup(5, &dims);
        let pilots = generate_orthogonal_pilots(3, 2.0).unwrap();
        let mut streams = ImpairmentStreams::new(1, 0);
        let imp = impaired_pilot_reception(&channels, &beams, &pilots, &ImpairmentProfile::ideal(), 0.3, &dims, &mut streams).unwrap();
        let plain = uplink_pilot_reception(
            &channels,
            &beams,
            &pilots,
            &NoiseConfig { sigma2_bs: 0.3, ..NoiseConfig::noiseless(1.0) },
            &mut substream(1, 0, "impair.noise"),
        )
        .unwrap();
        assert!(frobenius_sq(&(imp.s - plain)) < 1e-24);
        let truth = true_equivalent_channel(&channels, &beams, &dims).unwrap();
        assert!(frobenius_sq(&(imp.impaired_truth - truth.h_eq)) < 1e-24);
    }

    #[test]
    fn impairments_are_absorbed_into_estimate() {
        let dims = SystemDims::new(24, 4, 3).unwrap();
        let (channels, beams) = setup(6, &dims);
        let pilots = generate_orthogonal_pilots(3, 1.0).unwrap();
        let mut profile = ImpairmentProfile::new(0.2, 0.2, 1e-3, 1e-3, 0.0, 1.0).unwrap();
        for model in [BeamErrorModel::AngularOffset, BeamErrorModel::Literal] {
            profile.beam_error_model = model;
            let mut streams = ImpairmentStreams::new(9, 3);
            let imp = impaired_pilot_reception(&channels, &beams, &pilots, &profile, 0.0, &dims, &mut streams).unwrap();
            let rel = frobenius_sq(&(&imp.estimate.h_eq - &imp.impaired_truth)) / frobenius_sq(&imp.impaired_truth);
            assert!(rel < 1e-20);
            if hermitian_condition(&gram(&imp.estimate.h_eq)) < 1e6 {
                let pre = zf_precoder(&imp.estimate.h_eq).unwrap();
                let r = imp.impaired_truth.transpose() * pre.w - identity(3);
                assert!(frobenius_sq(&r).sqrt() < 1e-8);
            }
        }
    }

    #[test]
    fn streams_are_independent_per_impairment() {
        let dims = SystemDims::new(16, 4, 2).unwrap();
        let (channels, beams) = setup(7, &dims);
        let pilots = generate_orthogonal_pilots(2, 1.0).unwrap();
        let only_bs = ImpairmentProfile::new(0.0, 0.1, 0.0, 0.0, 0.0, 1.0).unwrap();
        let both = ImpairmentProfile::new(0.1, 0.1, 0.0, 0.0, 0.0, 1.0).unwrap();
        let a = impaired_pilot_reception(&channels, &beams, &pilots, &only_bs, 0.0, &dims, &mut ImpairmentStreams::new(2, 2)).unwrap();
        let b = impaired_pilot_reception(&channels, &beams, &pilots, &both, 0.0, &dims, &mut ImpairmentStreams::new(2, 2)).unwrap();
        // the base-station draws are the same whether or not user errors are on
        let mut s1 = ImpairmentStreams::new(2, 2);
        let mut s2 = ImpairmentStreams::new(2, 2);
        let _ = phase_error_diagonal(&mut s2.phase_ms, 0.1, 4).unwrap();
        assert_eq!(
            phase_error_diagonal(&mut s1.phase_bs, 0.1, 16).unwrap(),
            phase_error_diagonal(&mut s2.phase_bs, 0.1, 16).unwrap()
        );
        assert!(frobenius_sq(&(a.impaired_truth - b.impaired_truth)) > 0.0);
    }

    fn random_k(seed: u64, n: usize) -> CMatrix {
        let mut rng = seeded(seed);
        loop {
            let a = complex_normal_matrix(&mut rng, n, n, 1.0);
            let k = gram(&a) + identity(n) * Complex64::from(0.5);
            if hermitian_condition(&k) <= 100.0 {
                return k;
            }
        }
    }

    proptest! {
        #[test]
        fn impairment_diagonals_preserve_norm(seed in 0u64..1000, hw in 0.0f64..1.0, var in 0.0f64..0.1, ang in 0.0f64..PI) {
            let mut rng = seeded(seed);
            let v = complex_normal_matrix(&mut rng, 9, 1, 1.0);
            let d1 = draw_phase_error_matrix(&mut rng, hw, 9).unwrap();
            let d2 = draw_beamforming_error_matrix(&mut rng, var, ang, 9, 0.5, BeamErrorModel::AngularOffset).unwrap();
            let d3 = draw_beamforming_error_matrix(&mut rng, var, ang, 9, 0.5, BeamErrorModel::Literal).unwrap();
            for d in [d1, d2, d3] {
                let ok = d.iter().enumerate().all(|(i, z)| {
                    if i % 10 == 0 { (z.norm() - 1.0).abs() < 1e-14 } else { *z == Complex64::new(0.0, 0.0) }
                });
                prop_assert!(ok);
                prop_assert!(((&d * &v).norm() - v.norm()).abs() < 1e-12);
            }
        }

        #[test]
        fn xi_hat_never_exceeds_xi(a in 0.0f64..PI, b in 0.0f64..PI, xi in 0.01f64..1.0) {
            prop_assert!(xi_hat(a, b, xi) <= xi);
        }

        #[test]
        fn coefficient_one_is_corollary1(k in 0.0f64..100.0, snr in 0.0f64..1e4, m in 4usize..200, p in 1usize..32) {
            let dims = SystemDims::new(m, p, 4).unwrap();
            let a = rate_with_beamforming_errors(k, &dims, 1.0, snr).unwrap();
            let b = crate::zf_precoding::corollary1_rate(k, &dims, snr).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn corollary4_is_theorem2_on_scaled_identity(d2 in 1e-4f64..0.1, xi in 0.05f64..1.0, k in 0.1f64..50.0) {
            let dims = SystemDims::new(64, 8, 4).unwrap();
            let c = xi * 512.0 * k / (k + 1.0);
            let t = theorem2_rate(&(identity(4) * Complex64::from(c)), d2).unwrap();
            let r = corollary4_rate(d2, xi, k, &dims).unwrap();
            prop_assert!(t.iter().all(|v| ((v - r) / r).abs() < 1e-12));
        }

        #[test]
        fn first_order_error_is_second_order(seed in 0u64..5000) {
            let k = random_k(seed, 4);
            let mut rng = seeded(seed ^ 0xabc);
            let raw = complex_normal_matrix(&mut rng, 4, 4, 1.0);
            let dir = (&raw + raw.adjoint()) * Complex64::from(0.5);
            let unit = dir.clone() / Complex64::from(frobenius_sq(&dir).sqrt() / frobenius_sq(&k).sqrt());
            let err = |eps: f64| {
                let d = &unit * Complex64::from(eps);
                let exact = invert(&(&k + &d)).unwrap();
                frobenius_sq(&(first_order_inverse(&k, &d).unwrap() - exact)).sqrt()
            };
            let ratio = err(1e-3) / err(5e-4);
            prop_assert!((3.5..=4.5).contains(&ratio), "{}", ratio);
        }
    }
}
