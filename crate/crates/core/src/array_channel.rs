//! ULA steering vectors and Rician LOS + scattering channels.

use std::f64::consts::PI;

use rand::Rng;

use crate::linalg::cis;
use crate::rng::{complex_normal, complex_normal_matrix};
use crate::{CMatrix, CVector, Error, Result};

/// Antenna and RF-chain counts of the downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemDims {
    /// Base-station antennas `M`.
    pub bs_antennas: usize,
    /// Antennas per user `P`.
    pub ue_antennas: usize,
    /// Users `N`.
    pub users: usize,
    /// Base-station RF chains `N_RF`.
    pub rf_chains: usize,
    /// Element spacing over carrier wavelength, `d / lambda`.
    pub spacing_ratio: f64,
}

impl SystemDims {
    /// Dimensions with `N_RF = N` and half-wavelength spacing.
    pub fn new(bs_antennas: usize, ue_antennas: usize, users: usize) -> Result<Self> {
        let dims = SystemDims {
            bs_antennas,
            ue_antennas,
            users,
            rf_chains: users,
            spacing_ratio: 0.5,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.ue_antennas == 0 {
            return Err(Error::invalid("user and user-antenna counts must be positive"));
        }
        if !(self.bs_antennas >= self.rf_chains && self.rf_chains >= self.users) {
            return Err(Error::invalid(format!(
                "need M >= N_RF >= N, got M={}, N_RF={}, N={}",
                self.bs_antennas, self.rf_chains, self.users
            )));
        }
        if !(self.spacing_ratio > 0.0 && self.spacing_ratio.is_finite()) {
            return Err(Error::invalid("spacing ratio must be positive and finite"));
        }
        Ok(())
    }

    /// `M * P`, the array-gain product that shows up in every closed form.
    pub fn array_gain(&self) -> f64 {
        (self.bs_antennas * self.ue_antennas) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScatteringMode {
    /// Entries of `H_S` are i.i.d. CN(0, 1).
    IidGaussian,
    /// Sum of `sum(paths_per_cluster)` planar paths with CN(0, 1) gains and
    /// angles uniform on `[0, pi]`, normalised to unit average path power.
    Clustered { paths_per_cluster: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicianConfig {
    /// Rician K-factor; `f64::INFINITY` gives a pure LOS channel.
    pub kappa: f64,
    pub scattering: ScatteringMode,
}

impl RicianConfig {
    pub fn iid(kappa: f64) -> Self {
        RicianConfig {
            kappa,
            scattering: ScatteringMode::IidGaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::invalid(format!("Rician factor must be >= 0, got {}", self.kappa)));
        }
        if let ScatteringMode::Clustered { paths_per_cluster } = &self.scattering {
            if paths_per_cluster.is_empty() || paths_per_cluster.contains(&0) {
                return Err(Error::invalid(
                    "clustered scattering needs at least one cluster and one path per cluster",
                ));
            }
        }
        Ok(())
    }
}

/// One user's uplink channel `H_k` (M x P) with its ground-truth LOS angles.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMatrix,
    /// LOS angle at the base station.
    pub theta: f64,
    /// LOS angle at the user.
    pub phi: f64,
    pub kappa: f64,
}

impl ChannelRealization {
    /// Combines the LOS and scattering parts with [`assemble_channel`].
    pub fn assemble(theta: f64, phi: f64, los: &CMatrix, scatter: &CMatrix, kappa: f64) -> Result<Self> {
        Ok(ChannelRealization {
            h: assemble_channel(los, scatter, kappa)?,
            theta,
            phi,
            kappa,
        })
    }

    /// Draws a channel with the given LOS angles.
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        theta: f64,
        phi: f64,
        dims: &SystemDims,
        cfg: &RicianConfig,
    ) -> Result<Self> {
        let los = los_channel(theta, phi, dims)?;
        let scatter = scattering_channel(rng, dims, cfg)?;
        Self::assemble(theta, phi, &los, &scatter, cfg.kappa)
    }

    /// Signal seen by the base station when the user radiates from its first
    /// antenna: column 0 of `H_k`, i.e. `a h_L^BS + b h_S,1`.
    pub fn single_antenna_response(&self) -> CVector {
        self.h.column(0).into_owned()
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if !angle.is_finite() || !(0.0..=PI).contains(&angle) {
        return Err(Error::invalid(format!("angle {angle} is outside [0, pi]")));
    }
    Ok(())
}

/// ULA response: element `m` is `exp(-j 2 pi m (d/lambda) cos(angle))`.
pub fn steering_vector(angle: f64, n_elems: usize, spacing_ratio: f64) -> Result<CVector> {
    check_angle(angle)?;
    if n_elems == 0 {
        return Err(Error::invalid("steering vector needs at least one element"));
    }
    if !(spacing_ratio > 0.0 && spacing_ratio.is_finite()) {
        return Err(Error::invalid("spacing ratio must be positive and finite"));
    }
    let step = -2.0 * PI * spacing_ratio * angle.cos();
    Ok(CVector::from_fn(n_elems, |m, _| cis(step * m as f64)))
}

/// Rank-one LOS matrix `h_BS(theta) h_UE(phi)^H`.
pub fn los_channel(theta: f64, phi: f64, dims: &SystemDims) -> Result<CMatrix> {
    let bs = steering_vector(theta, dims.bs_antennas, dims.spacing_ratio)?;
    let ue = steering_vector(phi, dims.ue_antennas, dims.spacing_ratio)?;
    Ok(&bs * ue.adjoint())
}

/// Draws the scattering component `H_S` (M x P).
pub fn scattering_channel<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &SystemDims,
    cfg: &RicianConfig,
) -> Result<CMatrix> {
    cfg.validate()?;
    let (m, p) = (dims.bs_antennas, dims.ue_antennas);
    match &cfg.scattering {
        ScatteringMode::IidGaussian => Ok(complex_normal_matrix(rng, m, p, 1.0)),
        ScatteringMode::Clustered { paths_per_cluster } => {
            let total: usize = paths_per_cluster.iter().sum();
            let mut hs = CMatrix::zeros(m, p);
            for _ in 0..total {
                let alpha = complex_normal(rng, 1.0);
                let theta = rng.random_range(0.0..=PI);
                let phi = rng.random_range(0.0..=PI);
                let bs = steering_vector(theta, m, dims.spacing_ratio)?;
                let ue = steering_vector(phi, p, dims.spacing_ratio)?;
                hs += (&bs * ue.adjoint()) * alpha;
            }
            Ok(hs / crate::Complex64::from((total as f64).sqrt()))
        }
    }
}

/// Amplitude weights `(sqrt(k/(k+1)), sqrt(1/(k+1)))` of the LOS and
/// scattering parts.
pub fn rician_weights(kappa: f64) -> Result<(f64, f64)> {
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("Rician factor must be >= 0, got {kappa}")));
    }
    if kappa.is_infinite() {
        return Ok((1.0, 0.0));
    }
    Ok(((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt()))
}

/// `H = sqrt(k/(k+1)) H_L + sqrt(1/(k+1)) H_S`.
pub fn assemble_channel(los: &CMatrix, scatter: &CMatrix, kappa: f64) -> Result<CMatrix> {
    if los.shape() != scatter.shape() {
        return Err(Error::invalid(format!(
            "LOS is {:?} but scattering is {:?}",
            los.shape(),
            scatter.shape()
        )));
    }
    let (a, b) = rician_weights(kappa)?;
    Ok(if b == 0.0 {
        los.clone()
    } else if a == 0.0 {
        scatter.clone()
    } else {
        los * crate::Complex64::from(a) + scatter * crate::Complex64::from(b)
    })
}
