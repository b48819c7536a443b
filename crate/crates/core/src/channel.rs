//! Sparse multipath MIMO channels.
//!
//! A [`ChannelSet`] holds, for every user, a short list of resolvable paths,
//! each a complex gain vector over the transmit array plus an integer sample
//! delay. Everything downstream (delay plans, effective channels, the OFDM
//! view) is derived from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DamError, Result};
use crate::{CVector, C64};

/// Geometry and randomness for [`synthesize_channel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub num_antennas: usize,
    pub num_users: usize,
    pub paths_per_user: Vec<usize>,
    /// Inclusive delay interval in samples.
    pub delay_range: (usize, usize),
    /// Inclusive angle-of-departure interval in degrees.
    pub aod_range_deg: (f64, f64),
    /// Element spacing in wavelengths.
    pub antenna_spacing: f64,
    /// Large-scale attenuation applied equally to every path, in dB.
    pub path_loss_db: f64,
    pub rng_seed: u64,
}

impl GeometryConfig {
    /// `num_users` users with `paths` paths each, delays in `[0, max_delay]`,
    /// AoDs in `[-90, 90]` degrees, half-wavelength ULA, no path loss.
    pub fn uniform(
        num_antennas: usize,
        num_users: usize,
        paths: usize,
        max_delay: usize,
        seed: u64,
    ) -> Self {
        Self {
            num_antennas,
            num_users,
            paths_per_user: vec![paths; num_users],
            delay_range: (0, max_delay),
            aod_range_deg: (-90.0, 90.0),
            antenna_spacing: 0.5,
            path_loss_db: 0.0,
            rng_seed: seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_path_loss_db(mut self, path_loss_db: f64) -> Self {
        self.path_loss_db = path_loss_db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(DamError::InvalidConfig("num_antennas must be positive".into()));
        }
        if self.num_users == 0 {
            return Err(DamError::InvalidConfig("num_users must be positive".into()));
        }
        if self.paths_per_user.len() != self.num_users {
            return Err(DamError::InvalidConfig(format!(
                "paths_per_user has {} entries for {} users",
                self.paths_per_user.len(),
                self.num_users
            )));
        }
        if self.paths_per_user.iter().any(|&l| l == 0) {
            return Err(DamError::InvalidConfig("every user needs at least one path".into()));
        }
        let (lo, hi) = self.delay_range;
        if hi < lo {
            return Err(DamError::InvalidConfig(format!("empty delay range [{lo}, {hi}]")));
        }
        let slots = hi - lo + 1;
        if let Some(&l) = self.paths_per_user.iter().find(|&&l| l > slots) {
            return Err(DamError::InvalidConfig(format!(
                "delay range [{lo}, {hi}] cannot hold {l} distinct delays"
            )));
        }
        let (a0, a1) = self.aod_range_deg;
        if !(a0.is_finite() && a1.is_finite() && a0 <= a1) {
            return Err(DamError::InvalidConfig(format!("bad AoD range [{a0}, {a1}]")));
        }
        if !(self.antenna_spacing > 0.0 && self.antenna_spacing.is_finite()) {
            return Err(DamError::InvalidConfig("antenna_spacing must be positive".into()));
        }
        if !self.path_loss_db.is_finite() {
            return Err(DamError::InvalidConfig("path_loss_db must be finite".into()));
        }
        Ok(())
    }
}

/// One resolvable path: gain vector over the array and integer delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub gain: CVector,
    pub delay: usize,
}

/// Per-user multipath channels plus receiver noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    users: Vec<Vec<Path>>,
    noise_power: f64,
    num_antennas: usize,
}

impl ChannelSet {
    /// Validates that every user has at least one path, all gain vectors share
    /// one length, delays are distinct within a user and noise is positive.
    pub fn new(users: Vec<Vec<Path>>, noise_power: f64) -> Result<Self> {
        if users.is_empty() {
            return Err(DamError::EmptyInput("channel set needs at least one user"));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(DamError::InvalidConfig(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        let num_antennas = match users[0].first() {
            Some(p) => p.gain.len(),
            None => return Err(DamError::InvalidConfig("user 0 has no paths".into())),
        };
        if num_antennas == 0 {
            return Err(DamError::InvalidConfig("gain vectors are empty".into()));
        }
        for (k, paths) in users.iter().enumerate() {
            if paths.is_empty() {
                return Err(DamError::InvalidConfig(format!("user {k} has no paths")));
            }
            for (l, p) in paths.iter().enumerate() {
                if p.gain.len() != num_antennas {
                    return Err(DamError::DimensionMismatch(format!(
                        "path ({k},{l}) has {} antennas, expected {num_antennas}",
                        p.gain.len()
                    )));
                }
                if paths[..l].iter().any(|q| q.delay == p.delay) {
                    return Err(DamError::InvalidConfig(format!(
                        "user {k} has repeated delay {}",
                        p.delay
                    )));
                }
            }
        }
        Ok(Self { users, noise_power, num_antennas })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn paths(&self, k: usize) -> &[Path] {
        &self.users[k]
    }

    pub fn path(&self, k: usize, l: usize) -> &Path {
        &self.users[k][l]
    }

    pub fn num_paths(&self, k: usize) -> usize {
        self.users[k].len()
    }

    pub fn paths_per_user(&self) -> Vec<usize> {
        self.users.iter().map(Vec::len).collect()
    }

    /// Total number of paths over all users.
    pub fn total_paths(&self) -> usize {
        self.users.iter().map(Vec::len).sum()
    }

    pub fn max_delay(&self, k: usize) -> usize {
        self.users[k].iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn min_delay(&self, k: usize) -> usize {
        self.users[k].iter().map(|p| p.delay).min().unwrap_or(0)
    }

    /// Largest delay over all users.
    pub fn overall_max_delay(&self) -> usize {
        (0..self.num_users()).map(|k| self.max_delay(k)).max().unwrap_or(0)
    }

    /// Sum of squared path norms of user `k`.
    pub fn user_gain(&self, k: usize) -> f64 {
        self.users[k].iter().map(|p| p.gain.norm_squared()).sum()
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::new(self.users.clone(), noise_power)
    }

    /// Multiplies every gain vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let users = self
            .users
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| Path { gain: &p.gain * Complex64::new(factor, 0.0), delay: p.delay })
                    .collect()
            })
            .collect();
        Self { users, noise_power: self.noise_power, num_antennas: self.num_antennas }
    }

    /// Channel restricted to the listed users, in the given order.
    pub fn select_users(&self, users: &[usize]) -> Result<Self> {
        let mut picked = Vec::with_capacity(users.len());
        for &k in users {
            let paths = self
                .users
                .get(k)
                .ok_or(DamError::IndexOutOfRange { index: k, len: self.num_users() })?;
            picked.push(paths.clone());
        }
        Self::new(picked, self.noise_power)
    }

    /// Reorders each user's paths by decreasing gain norm.
    pub fn strongest_first(mut self) -> Self {
        for paths in &mut self.users {
            paths.sort_by(|a, b| b.gain.norm_squared().total_cmp(&a.gain.norm_squared()));
        }
        self
    }

    pub(crate) fn check_user(&self, k: usize) -> Result<()> {
        if k < self.num_users() {
            Ok(())
        } else {
            Err(DamError::IndexOutOfRange { index: k, len: self.num_users() })
        }
    }
}

/// Uniform-linear-array response `exp(j 2 pi d m sin(theta))`, not normalized.
pub fn steering_vector(num_antennas: usize, spacing: f64, theta_rad: f64) -> CVector {
    let phase = 2.0 * PI * spacing * theta_rad.sin();
    CVector::from_fn(num_antennas, |m, _| Complex64::from_polar(1.0, phase * m as f64))
}

/// Draws a random sparse channel.
///
/// Delays are drawn without replacement per user, AoDs uniformly, and each
/// path gain is circularly-symmetric Gaussian with power `L_k^-1` times the
/// path loss, multiplying a ULA steering vector. Paths are returned strongest
/// first.
pub fn synthesize_channel(cfg: &GeometryConfig, noise_power: f64) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (lo, hi) = cfg.delay_range;
    let (a0, a1) = cfg.aod_range_deg;
    let large_scale = 10f64.powf(-cfg.path_loss_db / 10.0);

    let mut users = Vec::with_capacity(cfg.num_users);
    for &num_paths in &cfg.paths_per_user {
        let delays = index::sample(&mut rng, hi - lo + 1, num_paths);
        let amp = (large_scale / num_paths as f64 / 2.0).sqrt();
        let mut paths = Vec::with_capacity(num_paths);
        for slot in delays.iter() {
            let theta = (a0 + (a1 - a0) * rng.random::<f64>()).to_radians();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let g = C64::new(re * amp, im * amp);
            let gain = steering_vector(cfg.num_antennas, cfg.antenna_spacing, theta) * g;
            paths.push(Path { gain, delay: lo + slot });
        }
        users.push(paths);
    }
    Ok(ChannelSet::new(users, noise_power)?.strongest_first())
}

/// Vertical stack of user `k`'s path vectors, length `M_t * L_k`.
pub fn stack_user_channel(ch: &ChannelSet, k: usize) -> Result<CVector> {
    ch.check_user(k)?;
    let m = ch.num_antennas();
    let paths = ch.paths(k);
    let mut out = CVector::zeros(m * paths.len());
    for (l, p) in paths.iter().enumerate() {
        out.rows_mut(l * m, m).copy_from(&p.gain);
    }
    Ok(out)
}

/// Per-sub-carrier channels after an `M`-point DFT of the impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmChannel {
    /// `gains[k][m]` is the channel of user `k` on sub-carrier `m`.
    gains: Vec<Vec<CVector>>,
    num_subcarriers: usize,
    subcarrier_noise_power: f64,
    num_antennas: usize,
}

impl OfdmChannel {
    /// Direct constructor, mostly for tests with hand-built flat channels.
    pub fn from_gains(gains: Vec<Vec<CVector>>, subcarrier_noise_power: f64) -> Result<Self> {
        let num_subcarriers = gains.first().map(Vec::len).unwrap_or(0);
        if num_subcarriers == 0 {
            return Err(DamError::EmptyInput("OFDM channel needs users and sub-carriers"));
        }
        let num_antennas = gains[0][0].len();
        for g in &gains {
            if g.len() != num_subcarriers || g.iter().any(|v| v.len() != num_antennas) {
                return Err(DamError::DimensionMismatch("ragged OFDM gain table".into()));
            }
        }
        if !(subcarrier_noise_power > 0.0) {
            return Err(DamError::InvalidConfig("sub-carrier noise power must be positive".into()));
        }
        Ok(Self { gains, num_subcarriers, subcarrier_noise_power, num_antennas })
    }

    pub fn gain(&self, k: usize, m: usize) -> &CVector {
        &self.gains[k][m]
    }

    pub fn user_gains(&self, k: usize) -> &[CVector] {
        &self.gains[k]
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    /// Per-sub-carrier noise power, `sigma^2 / M`.
    pub fn subcarrier_noise_power(&self) -> f64 {
        self.subcarrier_noise_power
    }

    /// Squared Frobenius norm of the full frequency-domain channel matrix.
    pub fn frobenius_norm_squared(&self) -> f64 {
        self.gains.iter().flatten().map(|v| v.norm_squared()).sum()
    }
}

/// `h_{k,m} = M^{-1/2} sum_l h_kl exp(-j 2 pi m n_kl / M)`.
///
/// Requires `M` larger than every path delay so a cyclic prefix of `n_max`
/// samples fits inside the symbol.
pub fn ofdm_channel(ch: &ChannelSet, num_subcarriers: usize) -> Result<OfdmChannel> {
    let max_delay = ch.overall_max_delay();
    if num_subcarriers <= max_delay {
        return Err(DamError::InvalidConfig(format!(
            "{num_subcarriers} sub-carriers cannot cover a delay spread of {max_delay} samples"
        )));
    }
    let norm = 1.0 / (num_subcarriers as f64).sqrt();
    let mt = ch.num_antennas();
    let gains = (0..ch.num_users())
        .map(|k| {
            (0..num_subcarriers)
                .map(|m| {
                    let mut acc = CVector::zeros(mt);
                    for p in ch.paths(k) {
                        // reduce m*n mod M before scaling to keep the phase exact
                        let turns = ((m * p.delay) % num_subcarriers) as f64 / num_subcarriers as f64;
                        let w = Complex64::from_polar(norm, -2.0 * PI * turns);
                        acc.axpy(w, &p.gain, C64::new(1.0, 0.0));
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(OfdmChannel {
        gains,
        num_subcarriers,
        subcarrier_noise_power: ch.noise_power() / num_subcarriers as f64,
        num_antennas: mt,
    })
}

/// Largest normalized correlation `|h_a^H h_b| / (|h_a| |h_b|)` over all
/// distinct path pairs, within and across users.
pub fn orthogonality_metric(ch: &ChannelSet) -> Result<f64> {
    let all: Vec<&CVector> = (0..ch.num_users()).flat_map(|k| ch.paths(k).iter().map(|p| &p.gain)).collect();
    if all.len() < 2 {
        return Err(DamError::UndefinedMetric("orthogonality needs at least two paths in total".into()));
    }
    let norms: Vec<f64> = all.iter().map(|v| v.norm()).collect();
    let mut worst = 0.0f64;
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            let denom = norms[a] * norms[b];
            if denom > 0.0 {
                worst = worst.max(all[a].dotc(all[b]).norm() / denom);
            }
        }
    }
    Ok(worst.min(1.0))
}
