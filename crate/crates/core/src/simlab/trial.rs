//! One Monte-Carlo trial of the estimation pipeline: draw users, train the
//! analog beams, send pilots, estimate the equivalent channel.

use std::f64::consts::PI;

use rand::Rng;

use crate::aoa_beam_training::{default_grid_size, train_beamformers, AnalogBeamformers, NoiseConfig};
use crate::array_channel::{ChannelRealization, RicianConfig, SystemDims};
use crate::pilot_equalization::{
    generate_pilots, ls_estimate, true_equivalent_channel, uplink_pilot_reception, EquivalentChannel, PilotFamily,
    PilotMatrix,
};
use crate::rng::substream;
use crate::{Error, Result};

/// How LOS angles are drawn for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnglePolicy {
    /// Both angles on the detection grids, so the trained beams can align.
    #[default]
    Grid,
    /// Both angles uniform on `[0, pi]`.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub dims: SystemDims,
    pub rician: RicianConfig,
    pub angles: AnglePolicy,
    /// Minimum `|cos(theta_i) - cos(theta_j)|` between users at the base
    /// station.
    pub min_cos_separation: f64,
    pub tone: NoiseConfig,
    pub pilots: PilotMatrix,
    pub pilot_noise: f64,
}

impl TrialSetup {
    /// Unit noise power, energies set from the SNRs (infinite SNR means no
    /// noise).
    pub fn new(
        dims: SystemDims,
        rician: RicianConfig,
        tone_snr: f64,
        pilot_snr: f64,
        family: PilotFamily,
    ) -> Result<Self> {
        dims.validate()?;
        rician.validate()?;
        let (energy, noise) = if pilot_snr.is_infinite() { (1.0, 0.0) } else { (pilot_snr, 1.0) };
        Ok(TrialSetup {
            pilots: generate_pilots(dims.users, energy, family)?,
            pilot_noise: noise,
            tone: NoiseConfig::from_tone_snr(tone_snr),
            angles: AnglePolicy::Grid,
            min_cos_separation: 2.0 / dims.bs_antennas as f64,
            dims,
            rician,
        })
    }
}

#[derive(Debug, Clone)]
pub struct HybridTrial {
    pub channels: Vec<ChannelRealization>,
    pub beams: AnalogBeamformers,
    pub truth: EquivalentChannel,
    pub estimate: EquivalentChannel,
}

/// Per-user `(theta, phi)`, rejecting base-station angles closer than
/// `min_cos_sep` in the cosine domain to an earlier user.
pub fn draw_user_angles<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &SystemDims,
    policy: AnglePolicy,
    min_cos_sep: f64,
) -> Result<Vec<(f64, f64)>> {
    let j_bs = default_grid_size(dims.bs_antennas).max(2);
    let j_ue = default_grid_size(dims.ue_antennas).max(2);
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(dims.users);
    for _ in 0..dims.users {
        let mut attempts = 0;
        loop {
            let (theta, phi) = match policy {
                AnglePolicy::Uniform => (rng.random_range(0.0..=PI), rng.random_range(0.0..=PI)),
                AnglePolicy::Grid => (
                    rng.random_range(0..j_bs) as f64 * PI / j_bs as f64,
                    rng.random_range(0..j_ue) as f64 * PI / j_ue as f64,
                ),
            };
            if out.iter().all(|(t, _)| (t.cos() - theta.cos()).abs() >= min_cos_sep) {
                out.push((theta, phi));
                break;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::invalid(format!(
                    "cannot place {} users with cosine separation {min_cos_sep}",
                    dims.users
                )));
            }
        }
    }
    Ok(out)
}

pub fn draw_channels<R: Rng + ?Sized>(rng: &mut R, setup: &TrialSetup, angles: &[(f64, f64)]) -> Result<Vec<ChannelRealization>> {
    angles
        .iter()
        .map(|&(t, p)| ChannelRealization::draw(rng, t, p, &setup.dims, &setup.rician))
        .collect()
}

/// Channels, beams, true and estimated equivalent channel for one trial.
pub fn run_hybrid_trial(setup: &TrialSetup, seed: u64, trial: u64) -> Result<HybridTrial> {
    let angles = draw_user_angles(
        &mut substream(seed, trial, "angles"),
        &setup.dims,
        setup.angles,
        setup.min_cos_separation,
    )?;
    let channels = draw_channels(&mut substream(seed, trial, "channel"), setup, &angles)?;
    let beams = train_beamformers(&channels, &setup.dims, &setup.tone, &mut substream(seed, trial, "training"))?;
    let truth = true_equivalent_channel(&channels, &beams, &setup.dims)?;
    let noise = NoiseConfig {
        sigma2_bs: setup.pilot_noise,
        ..setup.tone
    };
    let s = uplink_pilot_reception(&channels, &beams, &setup.pilots, &noise, &mut substream(seed, trial, "pilot"))?;
    let estimate = ls_estimate(&s, &setup.pilots, &setup.dims)?;
    Ok(HybridTrial {
        channels,
        beams,
        truth,
        estimate,
    })
}
