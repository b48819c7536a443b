//! Guard-interval overhead, effective spectral efficiency and PAPR.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::benchmarks::{sp_transmit_waveform, OfdmBeamformerSet, SpBeamformerSet};
use crate::dam::{transmit_waveform, PathBeamformerSet};
use crate::error::{DamError, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Dam,
    StrongestPath,
    Ofdm,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dam, Scheme::StrongestPath, Scheme::Ofdm];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Dam => "DAM",
            Scheme::StrongestPath => "SP",
            Scheme::Ofdm => "OFDM",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DAM" => Ok(Scheme::Dam),
            "SP" | "STRONGEST_PATH" | "STRONGEST-PATH" => Ok(Scheme::StrongestPath),
            "OFDM" => Ok(Scheme::Ofdm),
            _ => Err(DamError::InvalidConfig(format!("unknown scheme `{s}` (expected DAM, SP or OFDM)"))),
        }
    }
}

/// Block lengths that set the guard-interval overhead. All counts are in
/// single-carrier samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadConfig {
    /// Samples per channel coherence block.
    pub coherence_samples: u64,
    pub num_subcarriers: u64,
    /// Largest path delay over all users.
    pub max_delay: u64,
}

impl OverheadConfig {
    pub fn new(coherence_samples: u64, num_subcarriers: u64, max_delay: u64) -> Result<Self> {
        let cfg = Self { coherence_samples, num_subcarriers, max_delay };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coherence_samples == 0 || self.coherence_samples < 2 * self.max_delay {
            return Err(DamError::InvalidConfig(format!(
                "coherence block of {} samples cannot hold a guard of {}",
                self.coherence_samples,
                2 * self.max_delay
            )));
        }
        Ok(())
    }

    fn check_ofdm(&self) -> Result<()> {
        if self.num_subcarriers <= self.max_delay {
            return Err(DamError::InvalidConfig(format!(
                "{} sub-carriers do not exceed the maximum delay {}",
                self.num_subcarriers, self.max_delay
            )));
        }
        Ok(())
    }

    /// Guard length: `2 n_max` for DAM, `n_max` for strongest-path, and the
    /// cyclic prefix `n_max` per OFDM symbol.
    pub fn guard_samples(&self, scheme: Scheme) -> u64 {
        match scheme {
            Scheme::Dam => 2 * self.max_delay,
            Scheme::StrongestPath | Scheme::Ofdm => self.max_delay,
        }
    }

    /// Fraction of air time spent on the guard.
    pub fn overhead(&self, scheme: Scheme) -> Result<Ratio<u64>> {
        self.validate()?;
        Ok(match scheme {
            Scheme::Dam | Scheme::StrongestPath => {
                Ratio::new(self.guard_samples(scheme), self.coherence_samples)
            }
            Scheme::Ofdm => {
                self.check_ofdm()?;
                Ratio::new(self.max_delay, self.max_delay + self.num_subcarriers)
            }
        })
    }

    /// `1 - overhead`.
    pub fn efficiency_factor(&self, scheme: Scheme) -> Result<Ratio<u64>> {
        Ok(Ratio::from_integer(1) - self.overhead(scheme)?)
    }
}

/// Raw SINRs of one scheme: per user for single-carrier, per user and
/// sub-carrier for OFDM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeSinr<'a> {
    Dam(&'a [f64]),
    StrongestPath(&'a [f64]),
    Ofdm(&'a [Vec<f64>]),
}

fn log_rate(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(DamError::InvalidConfig(format!("SINR must be nonnegative, got {sinr}")));
    }
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Sum spectral efficiency in bits/s/Hz after the guard interval.
pub fn effective_spectral_efficiency(sinr: SchemeSinr<'_>, cfg: &OverheadConfig) -> Result<f64> {
    match sinr {
        SchemeSinr::Dam(g) | SchemeSinr::StrongestPath(g) => {
            let scheme = if matches!(sinr, SchemeSinr::Dam(_)) { Scheme::Dam } else { Scheme::StrongestPath };
            let f = cfg.efficiency_factor(scheme)?;
            let sum = g.iter().map(|&x| log_rate(x)).sum::<Result<f64>>()?;
            Ok(ratio_f64(f) * sum)
        }
        SchemeSinr::Ofdm(g) => {
            cfg.validate()?;
            cfg.check_ofdm()?;
            let m = cfg.num_subcarriers as usize;
            if g.iter().any(|u| u.len() != m) {
                return Err(DamError::DimensionMismatch(format!("expected {m} sub-carrier SINRs per user")));
            }
            let sum = g.iter().flatten().map(|&x| log_rate(x)).sum::<Result<f64>>()?;
            Ok(sum / (cfg.num_subcarriers + cfg.max_delay) as f64)
        }
    }
}

pub fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaprConfig {
    pub qam_order: usize,
    pub num_trials: usize,
    /// Single-carrier samples examined per trial; OFDM uses as many whole
    /// symbols as fit (at least one).
    pub samples_per_trial: usize,
    pub rng_seed: u64,
}

impl PaprConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(DamError::InvalidConfig(format!("QAM order must be 4, 16 or 64, got {}", self.qam_order)));
        }
        if self.num_trials == 0 || self.samples_per_trial == 0 {
            return Err(DamError::InvalidConfig("PAPR needs at least one trial and one sample".into()));
        }
        Ok(())
    }

    /// Independent generator for one trial.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(trial as u64);
        rng
    }
}

/// Square QAM with unit average energy. Index bits split into an in-phase
/// and a quadrature half, each Gray-coded onto its axis.
pub fn qam_constellation(order: usize) -> Result<Vec<C64>> {
    let side = (order as f64).sqrt().round() as usize;
    if order < 4 || side * side != order || !side.is_power_of_two() {
        return Err(DamError::InvalidConfig(format!("QAM order {order} is not an even power of two")));
    }
    let bits = side.trailing_zeros();
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let level = |g: usize| {
        let mut p = g;
        let mut shift = g >> 1;
        while shift > 0 {
            p ^= shift;
            shift >>= 1;
        }
        (2 * p) as f64 - (side - 1) as f64
    };
    Ok((0..order)
        .map(|i| C64::new(level(i >> bits), level(i & (side - 1))) / scale)
        .collect())
}

pub fn qam_symbols(alphabet: &[C64], n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Scheme PAPR (linear): the largest per-antenna ratio of peak sample power
/// to `mean_power[antenna]`. Antennas with zero mean power are skipped.
fn max_antenna_papr(peaks: &[f64], mean_power: &[f64]) -> Result<f64> {
    let mut best: Option<f64> = None;
    for (a, (&peak, &mean)) in peaks.iter().zip(mean_power).enumerate() {
        if mean > 0.0 {
            let r = peak / mean;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        } else {
            log::warn!("antenna {a} carries no power, excluded from PAPR");
        }
    }
    best.ok_or(DamError::UndefinedMetric("every antenna carries zero power".into()))
}

/// PAPR of the DAM waveform over `samples` steady-state samples, i.e.
/// after the largest pre-compensation delay so every path contributes.
pub fn dam_papr(beams: &PathBeamformerSet, symbols: &[Vec<C64>], samples: usize) -> Result<f64> {
    let start = beams.plan().max_kappa();
    let x = transmit_waveform(beams, symbols, start + samples)?;
    let mt = beams.num_antennas();
    let mut mean = vec![0.0; mt];
    for k in 0..beams.num_users() {
        for (i, w) in beams.stack(k).iter().enumerate() {
            mean[i % mt] += w.norm_sqr();
        }
    }
    let peaks: Vec<f64> = (0..mt)
        .map(|a| x.row(a).iter().skip(start).map(|v| v.norm_sqr()).fold(0.0, f64::max))
        .collect();
    max_antenna_papr(&peaks, &mean)
}

pub fn sp_papr(beams: &SpBeamformerSet, symbols: &[Vec<C64>], samples: usize) -> Result<f64> {
    let x = sp_transmit_waveform(beams, symbols, samples)?;
    let mt = beams.num_antennas();
    let mean: Vec<f64> = (0..mt).map(|a| beams.beams().iter().map(|f| f[a].norm_sqr()).sum()).collect();
    let peaks: Vec<f64> = (0..mt).map(|a| x.row(a).iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)).collect();
    max_antenna_papr(&peaks, &mean)
}

/// PAPR over `symbols.len()` OFDM symbols; `symbols[s][k][m]` modulates
/// sub-carrier `m` of user `k` in symbol `s`.
pub fn ofdm_papr(beams: &OfdmBeamformerSet, symbols: &[Vec<Vec<C64>>]) -> Result<f64> {
    let (kk, mm, mt) = (beams.num_users(), beams.num_subcarriers(), beams.num_antennas());
    if symbols.is_empty() {
        return Err(DamError::EmptyInput("OFDM symbols"));
    }
    if symbols.iter().any(|s| s.len() != kk || s.iter().any(|u| u.len() != mm)) {
        return Err(DamError::DimensionMismatch(format!("each OFDM symbol needs {kk} x {mm} entries")));
    }
    let fft = FftPlanner::new().plan_fft_inverse(mm);
    let norm = 1.0 / mm as f64;
    let mut mean = vec![0.0; mt];
    for k in 0..kk {
        for m in 0..mm {
            for (a, w) in beams.beam(k, m).iter().enumerate() {
                mean[a] += w.norm_sqr() * norm;
            }
        }
    }
    let mut peaks = vec![0.0f64; mt];
    let mut buf = vec![C64::new(0.0, 0.0); mm];
    for s in symbols {
        for (a, peak) in peaks.iter_mut().enumerate() {
            for (m, slot) in buf.iter_mut().enumerate() {
                *slot = (0..kk).map(|k| beams.beam(k, m)[a] * s[k][m]).sum();
            }
            fft.process(&mut buf);
            // |IDFT / sqrt(M)|^2
            let p = buf.iter().map(|v| v.norm_sqr() * norm).fold(0.0, f64::max);
            *peak = peak.max(p);
        }
    }
    max_antenna_papr(&peaks, &mean)
}

/// Draws QAM symbols and returns one DAM PAPR sample in dB.
pub fn dam_papr_trial(beams: &PathBeamformerSet, cfg: &PaprConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    cfg.validate()?;
    let alphabet = qam_constellation(cfg.qam_order)?;
    let n = beams.plan().max_kappa() + cfg.samples_per_trial;
    let symbols: Vec<Vec<C64>> = (0..beams.num_users()).map(|_| qam_symbols(&alphabet, n, rng)).collect();
    Ok(to_db(dam_papr(beams, &symbols, cfg.samples_per_trial)?))
}

pub fn sp_papr_trial(beams: &SpBeamformerSet, cfg: &PaprConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    cfg.validate()?;
    let alphabet = qam_constellation(cfg.qam_order)?;
    let n = cfg.samples_per_trial;
    let symbols: Vec<Vec<C64>> = (0..beams.num_users()).map(|_| qam_symbols(&alphabet, n, rng)).collect();
    Ok(to_db(sp_papr(beams, &symbols, n)?))
}

/// Uses `samples_per_trial / M` OFDM symbols, at least one.
pub fn ofdm_papr_trial(beams: &OfdmBeamformerSet, cfg: &PaprConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    cfg.validate()?;
    let alphabet = qam_constellation(cfg.qam_order)?;
    let mm = beams.num_subcarriers();
    let count = (cfg.samples_per_trial / mm).max(1);
    let symbols: Vec<Vec<Vec<C64>>> = (0..count)
        .map(|_| (0..beams.num_users()).map(|_| qam_symbols(&alphabet, mm, rng)).collect())
        .collect();
    Ok(to_db(ofdm_papr(beams, &symbols)?))
}

fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Empirical complementary CDF of PAPR samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub thresholds_db: Vec<f64>,
    /// Fraction of samples strictly above each threshold.
    pub probabilities: Vec<f64>,
}

impl CcdfCurve {
    pub fn from_samples(samples_db: &[f64], thresholds_db: &[f64]) -> Result<Self> {
        if samples_db.is_empty() {
            return Err(DamError::EmptyInput("PAPR samples"));
        }
        if thresholds_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DamError::InvalidConfig("CCDF thresholds must be strictly increasing".into()));
        }
        let mut sorted = samples_db.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let probabilities = thresholds_db
            .iter()
            .map(|&t| (sorted.len() - sorted.partition_point(|&s| s <= t)) as f64 / n)
            .collect();
        Ok(Self { thresholds_db: thresholds_db.to_vec(), probabilities })
    }
}

/// Smallest sample value exceeded by at most a fraction `prob` of samples.
pub fn exceedance_level(samples_db: &[f64], prob: f64) -> Result<f64> {
    if samples_db.is_empty() {
        return Err(DamError::EmptyInput("PAPR samples"));
    }
    if !(0.0..1.0).contains(&prob) {
        return Err(DamError::InvalidConfig(format!("exceedance probability must be in [0, 1), got {prob}")));
    }
    let mut sorted = samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let allowed = (prob * n as f64).floor() as usize;
    Ok(sorted[n - 1 - allowed.min(n - 1)])
}

/// Evenly spaced thresholds from `lo` to `hi` dB inclusive.
pub fn threshold_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(lo < hi) {
        return Err(DamError::InvalidConfig("threshold grid needs lo < hi and at least two points".into()));
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

/// Runs `trial` once per configured trial with its own generator and
/// collects the PAPR samples (dB) and their CCDF.
pub fn papr_ccdf<F>(cfg: &PaprConfig, thresholds_db: &[f64], mut trial: F) -> Result<(CcdfCurve, Vec<f64>)>
where
    F: FnMut(usize, &mut ChaCha8Rng) -> Result<f64>,
{
    cfg.validate()?;
    let samples = (0..cfg.num_trials)
        .map(|t| trial(t, &mut cfg.trial_rng(t)))
        .collect::<Result<Vec<f64>>>()?;
    Ok((CcdfCurve::from_samples(&samples, thresholds_db)?, samples))
}

/// Phase of sample `n` on sub-carrier `m` of an `M`-point inverse DFT.
pub fn idft_phase(m: usize, n: usize, size: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * ((m * n) % size) as f64 / size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelSet, Path};
    use crate::CVector;

    #[test]
    fn overhead_desk_values() {
        let cfg = OverheadConfig::new(128_000, 512, 80).unwrap();
        assert_eq!(cfg.overhead(Scheme::Dam).unwrap(), Ratio::new(1, 800));
        assert_eq!(cfg.efficiency_factor(Scheme::Dam).unwrap(), Ratio::new(99_875, 100_000));
        assert_eq!(cfg.overhead(Scheme::StrongestPath).unwrap(), Ratio::new(1, 1600));
        assert_eq!(cfg.overhead(Scheme::Ofdm).unwrap(), Ratio::new(80, 592));
    }

    #[test]
    fn zero_sinr_zero_rate() {
        let cfg = OverheadConfig::new(1000, 8, 3).unwrap();
        assert_eq!(effective_spectral_efficiency(SchemeSinr::Dam(&[0.0, 0.0]), &cfg).unwrap(), 0.0);
        let z = vec![vec![0.0; 8]; 2];
        assert_eq!(effective_spectral_efficiency(SchemeSinr::Ofdm(&z), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn invalid_overheads() {
        assert!(OverheadConfig::new(10, 64, 6).is_err());
        let cfg = OverheadConfig::new(1000, 4, 6).unwrap();
        assert!(cfg.overhead(Scheme::Ofdm).is_err());
        assert!(effective_spectral_efficiency(SchemeSinr::Dam(&[-1.0]), &cfg).is_err());
    }

    #[test]
    fn qam_unit_energy_and_gray() {
        for q in [4, 16, 64] {
            let c = qam_constellation(q).unwrap();
            let e: f64 = c.iter().map(|z| z.norm_sqr()).sum::<f64>() / q as f64;
            assert!((e - 1.0).abs() < 1e-12);
            let side = (q as f64).sqrt() as usize;
            // neighbors along an axis differ in one bit
            let mut by_pos: Vec<(f64, usize)> = (0..q).filter(|i| i & (side - 1) == 0).map(|i| (c[i].re, i)).collect();
            by_pos.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in by_pos.windows(2) {
                assert_eq!((w[0].1 ^ w[1].1).count_ones(), 1);
            }
        }
        assert!(qam_constellation(8).is_err());
    }

    #[test]
    fn constant_envelope_zero_db() {
        let ch = ChannelSet::new(vec![vec![Path { gain: CVector::from_element(1, C64::new(0.3, -0.4)), delay: 2 }]], 1.0)
            .unwrap();
        let beams = PathBeamformerSet::new(&ch, vec![CVector::from_element(1, C64::new(0.0, 2.0))]).unwrap();
        let cfg = PaprConfig { qam_order: 4, num_trials: 1, samples_per_trial: 64, rng_seed: 3 };
        let p = dam_papr_trial(&beams, &cfg, &mut cfg.trial_rng(0)).unwrap();
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn ofdm_fft_matches_direct_sum() {
        use crate::channel::OfdmChannel;
        let mm = 8;
        let gains = vec![(0..mm).map(|m| CVector::from_fn(2, |i, _| C64::new(1.0 + i as f64, m as f64))).collect()];
        let ofdm = OfdmChannel::from_gains(gains.clone(), 1.0).unwrap();
        let beams = OfdmBeamformerSet::new(&ofdm, gains.clone()).unwrap();
        let alphabet = qam_constellation(16).unwrap();
        let s: Vec<C64> = (0..mm).map(|m| alphabet[(3 * m + 1) % 16]).collect();
        let got = ofdm_papr(&beams, &[vec![s.clone()]]).unwrap();
        let mut best = 0.0f64;
        for a in 0..2 {
            let mean: f64 = (0..mm).map(|m| gains[0][m][a].norm_sqr()).sum::<f64>() / mm as f64;
            for n in 0..mm {
                let x: C64 = (0..mm).map(|m| gains[0][m][a] * s[m] * idft_phase(m, n, mm)).sum::<C64>()
                    / (mm as f64).sqrt();
                best = best.max(x.norm_sqr() / mean);
            }
        }
        assert!((got - best).abs() < 1e-9 * best);
    }

    #[test]
    fn ccdf_shape() {
        let samples = [1.0, 2.0, 2.0, 3.0];
        let c = CcdfCurve::from_samples(&samples, &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.probabilities, vec![1.0, 0.25, 0.0]);
        assert_eq!(exceedance_level(&samples, 0.25).unwrap(), 2.0);
        assert_eq!(exceedance_level(&samples, 0.0).unwrap(), 3.0);
        assert!(CcdfCurve::from_samples(&samples, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn trial_streams_differ_and_repeat() {
        let cfg = PaprConfig { qam_order: 4, num_trials: 2, samples_per_trial: 4, rng_seed: 9 };
        let a: u64 = cfg.trial_rng(0).random();
        let b: u64 = cfg.trial_rng(1).random();
        assert_ne!(a, b);
        assert_eq!(a, cfg.trial_rng(0).random::<u64>());
    }
}
