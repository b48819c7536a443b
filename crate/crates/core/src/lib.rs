//! Link-level simulation and optimization for multi-user single-carrier
//! delay alignment modulation (DAM) in wideband multi-antenna downlinks.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: sparse multipath channel synthesis, stacking and the
//!   per-sub-carrier OFDM view of the same channel.
//! - [`dam`]: delay pre-compensation, the effective-channel bank, exact
//!   per-user SINR, and a time-domain waveform simulator that serves as a
//!   brute-force check of the analytic SINR.
//! - [`conic`]: SINR-constrained power minimization (SOCP), water-filling and
//!   a monotone successive convex approximation (SCA) driver.
//! - [`beamforming`]: per-path MRT, ZF and RZF for DAM.
//! - [`benchmarks`]: strongest-path and OFDM beamforming baselines.
//! - [`rate_region`]: Pareto boundary points via rate-profile bisection and SCA.
//! - [`metrics`]: guard-interval overhead, effective spectral efficiency and
//!   PAPR/CCDF analysis.
//!
//! All physical quantities are linear (watts, not dBm); conversion helpers
//! live in [`units`].

pub mod beamforming;
pub mod benchmarks;
pub mod channel;
pub mod conic;
pub mod dam;
pub mod error;
pub mod metrics;
pub mod rate_region;
pub mod units;

pub use error::{DamError, Result};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
