//! Link-level laboratory for multi-user hybrid mmWave MIMO.
//!
//! The crate covers the whole downlink chain of a hybrid system where the base
//! station has `M` antennas but only `N_RF` RF chains, serving `N` users that
//! each carry a `P`-element array and a single RF chain:
//!
//! * [`array_channel`] builds ULA steering vectors and Rician LOS + scattering
//!   channels.
//! * [`aoa_beam_training`] estimates the strongest angle of arrival at both
//!   ends from tone observations on a detection grid and turns the estimates
//!   into analog beamformers.
//! * [`pilot_equalization`] sends orthogonal pilots through those beams and
//!   recovers the `N x N` equivalent channel by least squares.
//! * [`zf_precoding`] inverts the equivalent channel, evaluates downlink SINR
//!   and the closed-form rate bounds, and provides the fully digital baseline.
//! * [`impairments`] perturbs the chain with phase-shifter errors, pointing
//!   errors and CSI errors and evaluates the impaired-rate approximations.
//! * [`simlab`] runs seeded Monte-Carlo scenarios and writes CSV.
//!
//! Conventions: angles are radians, SNRs are linear unless a name says `_db`,
//! and the equivalent channel is stored as `H_eq`, so that row `k` of
//! `H_eq^T` is the downlink channel seen by user `k`.

pub mod aoa_beam_training;
pub mod array_channel;
pub mod error;
pub mod impairments;
pub mod linalg;
pub mod pilot_equalization;
pub mod rng;
pub mod simlab;
pub mod zf_precoding;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
