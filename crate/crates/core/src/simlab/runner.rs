//! Scenario execution.
//!
//! Each trial draws from its own streams keyed by `(seed, trial, tag)` and
//! returns a fixed-length sample vector; samples are collected in trial order
//! and reduced sequentially, so results do not depend on the thread count.

use crate::array_channel::{RicianConfig, SystemDims};
use crate::impairments::{
    corollary4_rate, corollary5_gap, impaired_pilot_reception, inject_csi_error, power_loss_coefficient,
    rate_with_beamforming_errors, simulated_rate_with_csi_errors, theorem2_rate, ImpairmentProfile, ImpairmentStreams,
    PowerLossMode,
};
use crate::pilot_equalization::{closed_form_mse, normalized_mse};
use crate::rng::substream;
use crate::simlab::config::{Scenario, ScenarioConfig, XiMode};
use crate::simlab::trial::{run_hybrid_trial, HybridTrial, TrialSetup};
use crate::zf_precoding::{
    corollary1_rate, corollary3_gap, downlink_sinr, fully_digital_bounds, hybrid_rate_upper_bound, zf_precoder,
};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario: String,
    pub x: f64,
    pub x_unit: String,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub records: Vec<ResultRecord>,
    /// Non-fatal notes, e.g. a power-loss rule that had to fall back.
    pub warnings: Vec<String>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Runs `f(trial)` for every trial and returns the samples in trial order.
fn collect_trials<F>(trials: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials as u64).map(f).collect()
    }
}

/// Mean and standard error of column `j`.
fn summarize(samples: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
    if samples.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    out: Vec<ResultRecord>,
}

impl Recorder<'_> {
    fn push(&mut self, x: f64, unit: &str, metric: &str, value: f64, trials: usize, stderr: f64) {
        self.out.push(ResultRecord {
            scenario: self.cfg.scenario.name().to_string(),
            x,
            x_unit: unit.to_string(),
            metric: metric.to_string(),
            value,
            trials,
            stderr,
        });
    }

    /// One record per metric for columns `offset..offset + names.len()`.
    fn push_columns(&mut self, x: f64, unit: &str, names: &[&str], samples: &[Vec<f64>], offset: usize) {
        for (i, name) in names.iter().enumerate() {
            let (m, se) = summarize(samples, offset + i);
            self.push(x, unit, name, m, samples.len(), se);
        }
    }
}

fn setup_for(cfg: &ScenarioConfig, dims: SystemDims, kappa: f64) -> Result<TrialSetup> {
    let mut s = TrialSetup::new(
        dims,
        RicianConfig {
            kappa,
            scattering: cfg.scattering.clone(),
        },
        db_to_linear(cfg.tone_snr_db),
        db_to_linear(cfg.pilot_snr_db),
        cfg.pilots,
    )?;
    s.angles = cfg.angles;
    s.min_cos_separation = cfg.angle_sep / dims.bs_antennas as f64;
    s.tone.fresh_noise_per_correlation = cfg.fresh_noise;
    Ok(s)
}

fn with_m(dims: &SystemDims, m: usize) -> SystemDims {
    SystemDims {
        bs_antennas: m,
        ..*dims
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean per-user rate of ZF built on `estimate`, served over `truth`.
/// `None` when the precoder cannot be formed.
fn zf_rates(estimate: &CMatrix, truth: &CMatrix, snrs: &[f64]) -> Result<Option<Vec<f64>>> {
    let pre = match zf_precoder(estimate) {
        Ok(p) => p,
        Err(Error::PrecodingSingular { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        let sinr = downlink_sinr(truth, &pre, snr)?;
        out.push(mean(&sinr.iter().map(|s| (1.0 + s).log2()).collect::<Vec<_>>()));
    }
    Ok(Some(out))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cfg.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?;
        return pool.install(|| dispatch(cfg));
    }
    dispatch(cfg)
}

fn dispatch(cfg: &ScenarioConfig) -> Result<RunReport> {
    if cfg.scenario != Scenario::RateVsKappa && cfg.kappa.len() != 1 {
        return Err(Error::config("kappa", format!("{} takes a single Rician factor", cfg.scenario)));
    }
    if matches!(cfg.scenario, Scenario::RateVsKappa | Scenario::AntennaSweep) && cfg.snr_db.len() != 1 {
        return Err(Error::config("snr_db", format!("{} takes a single SNR", cfg.scenario)));
    }
    let mut rec = Recorder { cfg, out: Vec::new() };
    let mut warnings = Vec::new();
    match cfg.scenario {
        Scenario::MseSweep => mse_sweep(cfg, &mut rec)?,
        Scenario::RateVsSnr => rate_vs_snr(cfg, &mut rec)?,
        Scenario::RateVsKappa => rate_vs_kappa(cfg, &mut rec)?,
        Scenario::Impairments => impairments(cfg, &mut rec, &mut warnings)?,
        Scenario::AntennaSweep => antenna_sweep(cfg, &mut rec, &mut warnings)?,
    }
    Ok(RunReport {
        records: rec.out,
        warnings,
    })
}

fn mse_sweep(cfg: &ScenarioConfig, rec: &mut Recorder) -> Result<()> {
    for &m in &cfg.sweep_m {
        let dims = with_m(&cfg.dims, m);
        let setup = setup_for(cfg, dims, cfg.kappa[0])?;
        let samples = collect_trials(cfg.trials, |t| {
            let tr = run_hybrid_trial(&setup, cfg.seed, t)?;
            Ok(vec![normalized_mse(&tr.estimate, &tr.truth, &dims)])
        })?;
        let x = dims.array_gain();
        rec.push_columns(x, "MP", &["mse_sim"], &samples, 0);
        let cf = closed_form_mse(setup.pilot_noise, setup.pilots.pilot_energy, m, dims.ue_antennas);
        rec.push(x, "MP", "mse_closed_form", cf, cfg.trials, 0.0);
    }
    Ok(())
}

const SNR_METRICS: [&str; 7] = [
    "rate_sim",
    "rate_upper",
    "rate_asymptotic",
    "fd_rate_sim",
    "fd_rate_upper",
    "fd_rate_asymptotic",
    "zf_outage",
];

fn rate_vs_snr(cfg: &ScenarioConfig, rec: &mut Recorder) -> Result<()> {
    let dims = cfg.dims;
    let kappa = cfg.kappa[0];
    let setup = setup_for(cfg, dims, kappa)?;
    let snrs: Vec<f64> = cfg.snr_db.iter().map(|&d| db_to_linear(d)).collect();
    let k = SNR_METRICS.len();
    let samples = collect_trials(cfg.trials, |t| {
        let tr = run_hybrid_trial(&setup, cfg.seed, t)?;
        let rates = zf_rates(&tr.estimate.h_eq, &tr.truth.h_eq, &snrs)?;
        let mut row = Vec::with_capacity(k * snrs.len());
        for (i, &snr) in snrs.iter().enumerate() {
            let fd = fully_digital_bounds(&tr.channels, &dims, snr).ok();
            row.extend([
                rates.as_ref().map_or(0.0, |r| r[i]),
                hybrid_rate_upper_bound(&tr.beams.f_rf, kappa, &dims, snr)?,
                corollary1_rate(kappa, &dims, snr)?,
                fd.map_or(0.0, |b| b.simulated),
                fd.map_or(0.0, |b| b.upper),
                fd.map_or(0.0, |b| b.asymptotic),
                if rates.is_some() { 0.0 } else { 1.0 },
            ]);
        }
        Ok(row)
    })?;
    for (i, &x) in cfg.snr_db.iter().enumerate() {
        rec.push_columns(x, "dB", &SNR_METRICS, &samples, i * k);
    }
    Ok(())
}

const KAPPA_METRICS: [&str; 6] = ["rate_upper", "fd_rate_upper", "gap_upper", "rate_sim", "fd_rate_sim", "zf_outage"];

fn rate_vs_kappa(cfg: &ScenarioConfig, rec: &mut Recorder) -> Result<()> {
    let dims = cfg.dims;
    let snr = db_to_linear(cfg.snr_db[0]);
    for &kappa in &cfg.kappa {
        let setup = setup_for(cfg, dims, kappa)?;
        let samples = collect_trials(cfg.trials, |t| {
            let tr = run_hybrid_trial(&setup, cfg.seed, t)?;
            let hb_up = hybrid_rate_upper_bound(&tr.beams.f_rf, kappa, &dims, snr)?;
            let fd = fully_digital_bounds(&tr.channels, &dims, snr).ok();
            let fd_up = match fd {
                Some(b) => b.upper,
                // the bound itself never needs an inverse
                None => {
                    let tr_h: f64 = tr.channels.iter().map(|c| c.single_antenna_response().norm_squared()).sum();
                    (1.0 + dims.ue_antennas as f64 / (dims.users * dims.users) as f64 * tr_h * snr).log2()
                }
            };
            let rates = zf_rates(&tr.estimate.h_eq, &tr.truth.h_eq, &[snr])?;
            Ok(vec![
                hb_up,
                fd_up,
                hb_up - fd_up,
                rates.as_ref().map_or(0.0, |r| r[0]),
                fd.map_or(0.0, |b| b.simulated),
                if rates.is_some() { 0.0 } else { 1.0 },
            ])
        })?;
        rec.push_columns(kappa, "kappa", &KAPPA_METRICS, &samples, 0);
        let gap = if kappa > 0.0 { corollary3_gap(kappa)? } else { f64::NEG_INFINITY };
        rec.push(kappa, "kappa", "gap_closed_form", gap, cfg.trials, 0.0);
    }
    Ok(())
}

/// Builds the impairment profile, resolving the default AoA variance and the
/// power-loss coefficient for `dims`.
pub fn impairment_profile(cfg: &ScenarioConfig, dims: &SystemDims, warnings: &mut Vec<String>) -> Result<ImpairmentProfile> {
    let s = &cfg.impair;
    let var_bs = s.var_aoa_bs.unwrap_or(1.782 / (2.0 * dims.bs_antennas as f64));
    let mode = match s.xi_mode {
        XiMode::HalfPower => PowerLossMode::HalfPower,
        XiMode::MonteCarlo => PowerLossMode::MonteCarlo {
            draws: s.xi_draws,
            reference_angle: std::f64::consts::FRAC_PI_2,
        },
    };
    let loss = power_loss_coefficient(var_bs, dims.bs_antennas, dims.spacing_ratio, mode, &mut substream(cfg.seed, 0, "xi"))?;
    if let Some(w) = loss.warning {
        warnings.push(format!("M={}: {w}", dims.bs_antennas));
    }
    let mut p = ImpairmentProfile::new(s.a_deg.to_radians(), s.b_deg.to_radians(), var_bs, s.var_aoa_ms, s.delta2, loss.xi)?;
    p.beam_error_model = s.beam_model;
    p.csi_error_scale = s.csi_scale;
    Ok(p)
}

/// Rates with CSI errors for one profile, plus the mean high-SNR closed
/// form of that realization. `None` on precoder outage.
fn csi_error_rates(
    tr: &HybridTrial,
    setup: &TrialSetup,
    profile: &ImpairmentProfile,
    seed: u64,
    trial: u64,
    snrs: &[f64],
) -> Result<(Option<Vec<f64>>, f64)> {
    let dims = &setup.dims;
    let mut streams = ImpairmentStreams::new(seed, trial);
    let rx = impaired_pilot_reception(&tr.channels, &tr.beams, &setup.pilots, profile, setup.pilot_noise, dims, &mut streams)?;
    let mut p = inject_csi_error(&rx.impaired_truth, profile.delta2, dims, profile.csi_error_scale, &mut streams.csi)?;
    p.h_eq_tilde += &rx.estimate.h_eq - &rx.impaired_truth;
    let closed = theorem2_rate(&p.gram, profile.delta2).map(|r| mean(&r)).unwrap_or(0.0);
    let mut out = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        match simulated_rate_with_csi_errors(&p, snr) {
            Ok(r) => out.push(mean(&r)),
            Err(Error::PrecodingSingular { .. }) => return Ok((None, closed)),
            Err(e) => return Err(e),
        }
    }
    Ok((Some(out), closed))
}

const IMPAIR_METRICS: [&str; 5] = ["rate_ideal_sim", "rate_impaired_sim", "gap_sim", "zf_outage", "rate_ideal_theorem2"];

fn impairments(cfg: &ScenarioConfig, rec: &mut Recorder, warnings: &mut Vec<String>) -> Result<()> {
    let dims = cfg.dims;
    let kappa = cfg.kappa[0];
    let setup = setup_for(cfg, dims, kappa)?;
    let profile = impairment_profile(cfg, &dims, warnings)?;
    let ideal = profile.without_hardware();
    let snrs: Vec<f64> = cfg.snr_db.iter().map(|&d| db_to_linear(d)).collect();
    let k = IMPAIR_METRICS.len();
    let samples = collect_trials(cfg.trials, |t| {
        let tr = run_hybrid_trial(&setup, cfg.seed, t)?;
        let (a, th2) = csi_error_rates(&tr, &setup, &ideal, cfg.seed, t, &snrs)?;
        let (b, _) = csi_error_rates(&tr, &setup, &profile, cfg.seed, t, &snrs)?;
        let outage = if a.is_some() && b.is_some() { 0.0 } else { 1.0 };
        let mut row = Vec::with_capacity(k * snrs.len());
        for i in 0..snrs.len() {
            let ra = a.as_ref().map_or(0.0, |r| r[i]);
            let rb = b.as_ref().map_or(0.0, |r| r[i]);
            row.extend([ra, rb, ra - rb, outage, th2]);
        }
        Ok(row)
    })?;
    let gap_cf = corollary5_gap(profile.xi_hat)?;
    for (i, (&x, &snr)) in cfg.snr_db.iter().zip(&snrs).enumerate() {
        rec.push_columns(x, "dB", &IMPAIR_METRICS, &samples, i * k);
        let n = cfg.trials;
        rec.push(x, "dB", "rate_ideal_corollary4", corollary4_rate(profile.delta2, 1.0, kappa, &dims)?, n, 0.0);
        rec.push(x, "dB", "rate_impaired_corollary4", corollary4_rate(profile.delta2, profile.xi_hat, kappa, &dims)?, n, 0.0);
        rec.push(x, "dB", "rate_ideal_hw_closed_form", rate_with_beamforming_errors(kappa, &dims, 1.0, snr)?, n, 0.0);
        rec.push(x, "dB", "rate_impaired_hw_closed_form", rate_with_beamforming_errors(kappa, &dims, profile.xi_hat, snr)?, n, 0.0);
        rec.push(x, "dB", "gap_closed_form", gap_cf, n, 0.0);
        rec.push(x, "dB", "xi", profile.xi, n, 0.0);
        rec.push(x, "dB", "xi_hat", profile.xi_hat, n, 0.0);
    }
    Ok(())
}

const ANTENNA_METRICS: [&str; 4] = ["rate_perfect_sim", "rate_csi_sim", "rate_impaired_sim", "zf_outage"];

fn antenna_sweep(cfg: &ScenarioConfig, rec: &mut Recorder, warnings: &mut Vec<String>) -> Result<()> {
    let kappa = cfg.kappa[0];
    let snr = db_to_linear(cfg.snr_db[0]);
    for &m in &cfg.sweep_m {
        let dims = with_m(&cfg.dims, m);
        let setup = setup_for(cfg, dims, kappa)?;
        let profile = impairment_profile(cfg, &dims, warnings)?;
        let ideal = profile.without_hardware();
        let samples = collect_trials(cfg.trials, |t| {
            let tr = run_hybrid_trial(&setup, cfg.seed, t)?;
            let perfect = zf_rates(&tr.estimate.h_eq, &tr.truth.h_eq, &[snr])?;
            let (a, _) = csi_error_rates(&tr, &setup, &ideal, cfg.seed, t, &[snr])?;
            let (b, _) = csi_error_rates(&tr, &setup, &profile, cfg.seed, t, &[snr])?;
            let ok = perfect.is_some() && a.is_some() && b.is_some();
            Ok(vec![
                perfect.map_or(0.0, |r| r[0]),
                a.map_or(0.0, |r| r[0]),
                b.map_or(0.0, |r| r[0]),
                if ok { 0.0 } else { 1.0 },
            ])
        })?;
        let x = m as f64;
        rec.push_columns(x, "M", &ANTENNA_METRICS, &samples, 0);
        let n = cfg.trials;
        rec.push(x, "M", "rate_asymptotic", corollary1_rate(kappa, &dims, snr)?, n, 0.0);
        rec.push(x, "M", "rate_csi_corollary4", corollary4_rate(profile.delta2, 1.0, kappa, &dims)?, n, 0.0);
        rec.push(x, "M", "rate_impaired_corollary4", corollary4_rate(profile.delta2, profile.xi_hat, kappa, &dims)?, n, 0.0);
    }
    Ok(())
}
