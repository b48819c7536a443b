//! Reference schemes: strongest-path single-carrier beamforming and
//! per-sub-carrier OFDM beamforming, each with MRT, ZF and RZF.

use num_complex::Complex64;

use crate::beamforming::{channel_matrix, path_offset, regularized_directions, zf_directions};
use crate::channel::{ChannelSet, OfdmChannel};
use crate::conic::power_sca::{PowerAllocation, RateTerm};
use crate::conic::{sca_drive, water_fill, InterferenceModel, SolverSettings};
use crate::dam::{empirical_sinr_at_lags, EmpiricalSinr, SinrReport};
use crate::error::{DamError, Result};
use crate::{CMatrix, CVector, C64};

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(DamError::InvalidConfig(format!("transmit power must be positive, got {p}")))
    }
}

/// One beam per user, aimed at its strongest path (path 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SpBeamformerSet {
    beams: Vec<CVector>,
}

impl SpBeamformerSet {
    pub fn new(ch: &ChannelSet, beams: Vec<CVector>) -> Result<Self> {
        if beams.len() != ch.num_users() || beams.iter().any(|b| b.len() != ch.num_antennas()) {
            return Err(DamError::DimensionMismatch("one M_t-length beam per user".into()));
        }
        Ok(Self { beams })
    }

    pub fn beam(&self, k: usize) -> &CVector {
        &self.beams[k]
    }

    pub fn beams(&self) -> &[CVector] {
        &self.beams
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.beams.first().map(|b| b.len()).unwrap_or(0)
    }

    pub fn total_power(&self) -> f64 {
        self.beams.iter().map(|b| b.norm_squared()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpSolution {
    pub beams: SpBeamformerSet,
    pub reports: Vec<SinrReport>,
    /// Objective trace for RZF; a single entry otherwise.
    pub trace: Vec<f64>,
}

impl SpSolution {
    fn scored(ch: &ChannelSet, beams: SpBeamformerSet) -> Result<Self> {
        let reports = sp_sinr(ch, &beams)?;
        let trace = vec![reports.iter().map(SinrReport::rate).sum()];
        Ok(Self { beams, reports, trace })
    }

    pub fn per_user_rate(&self) -> Vec<f64> {
        self.reports.iter().map(SinrReport::rate).collect()
    }

    pub fn sum_rate(&self) -> f64 {
        self.reports.iter().map(SinrReport::rate).sum()
    }
}

/// SINR with single-tap detection on each user's strongest path: the other
/// paths of the user are ISI, every path carrying another user's beam is IUI.
pub fn sp_sinr(ch: &ChannelSet, beams: &SpBeamformerSet) -> Result<Vec<SinrReport>> {
    if beams.num_users() != ch.num_users() || beams.num_antennas() != ch.num_antennas() {
        return Err(DamError::ContractViolation("beams do not match the channel set".into()));
    }
    InterferenceModel::strongest_path(ch).reports(&beams.beams)
}

/// `f_k = sqrt(P) h_k1 / |[h_11 .. h_K1]|_F`.
pub fn sp_mrt(ch: &ChannelSet, p: f64) -> Result<SpSolution> {
    check_power(p)?;
    let fro = (0..ch.num_users()).map(|k| ch.path(k, 0).gain.norm_squared()).sum::<f64>().sqrt();
    let c = Complex64::new(p.sqrt() / fro, 0.0);
    let beams = (0..ch.num_users()).map(|k| &ch.path(k, 0).gain * c).collect();
    SpSolution::scored(ch, SpBeamformerSet::new(ch, beams)?)
}

/// Strongest-path ZF: each beam nulls every path except its user's
/// strongest one, with water-filling across users.
pub fn sp_zf(ch: &ChannelSet, p: f64) -> Result<SpSolution> {
    check_power(p)?;
    let w = zf_directions(&channel_matrix(ch))?;
    let cols: Vec<CVector> = (0..ch.num_users()).map(|k| w.column(path_offset(ch, k)).into_owned()).collect();
    let inv: Vec<f64> = cols.iter().map(|c| c.norm_squared() * ch.noise_power()).collect();
    let powers = water_fill(&inv, p)?;
    let beams = cols
        .iter()
        .zip(&powers)
        .map(|(c, &pk)| c * Complex64::new((pk / c.norm_squared()).sqrt(), 0.0))
        .collect();
    SpSolution::scored(ch, SpBeamformerSet::new(ch, beams)?)
}

/// Unit directions `f~_k1 / |f~_k1|` from the full regularized inverse.
pub fn sp_rzf_directions(ch: &ChannelSet, p: f64) -> Result<Vec<CVector>> {
    check_power(p)?;
    let eps = ch.total_paths() as f64 * ch.noise_power() / p;
    let f = regularized_directions(&channel_matrix(ch), eps);
    Ok((0..ch.num_users())
        .map(|k| {
            let c = f.column(path_offset(ch, k));
            c / Complex64::new(c.norm(), 0.0)
        })
        .collect())
}

/// Power-only problem for fixed unit directions `u_k`; term `k` sees
/// `b_kk'l = |h_kl^H u_k'|^2`.
fn sp_power_problem(ch: &ChannelSet, dirs: &[CVector], p: f64, settings: &SolverSettings) -> PowerAllocation {
    let kk = ch.num_users();
    let terms = (0..kk)
        .map(|k| {
            let gains: Vec<f64> = (0..kk)
                .map(|o| ch.paths(k).iter().map(|path| path.gain.dotc(&dirs[o]).norm_sqr()).sum())
                .collect();
            let own_desired = ch.path(k, 0).gain.dotc(&dirs[k]).norm_sqr();
            let signal = gains.iter().copied().enumerate().collect();
            let interference = gains
                .iter()
                .enumerate()
                .map(|(o, &g)| (o, if o == k { (g - own_desired).max(0.0) } else { g }))
                .collect();
            RateTerm { weight: 1.0, signal, interference }
        })
        .collect();
    PowerAllocation { terms, num_vars: kk, budget: p, noise_power: ch.noise_power(), settings: settings.clone() }
}

/// Strongest-path RZF with SCA over the per-user powers; phases stay zero.
pub fn sp_rzf(ch: &ChannelSet, p: f64, settings: &SolverSettings) -> Result<SpSolution> {
    let dirs = sp_rzf_directions(ch, p)?;
    let problem = sp_power_problem(ch, &dirs, p, settings);
    let out = sca_drive(&problem, problem.equal_split(), settings)?;
    let beams = dirs.iter().zip(&out.point).map(|(u, &pk)| u * Complex64::new(pk.sqrt(), 0.0)).collect();
    let mut sol = SpSolution::scored(ch, SpBeamformerSet::new(ch, beams)?)?;
    sol.trace = out.trace;
    Ok(sol)
}

/// `x[n] = sum_k f_k s_k[n]`, as an `M_t x horizon` matrix.
pub fn sp_transmit_waveform(beams: &SpBeamformerSet, symbols: &[Vec<C64>], horizon: usize) -> Result<CMatrix> {
    if symbols.len() != beams.num_users() || symbols.iter().any(|s| s.len() < horizon) {
        return Err(DamError::DimensionMismatch("one symbol stream of at least `horizon` per user".into()));
    }
    let mut x = CMatrix::zeros(beams.num_antennas(), horizon);
    for (f, s) in beams.beams.iter().zip(symbols) {
        for (n, &sym) in s.iter().enumerate().take(horizon) {
            x.column_mut(n).axpy(sym, f, C64::new(1.0, 0.0));
        }
    }
    Ok(x)
}

/// Waveform-based SINR estimate for strongest-path detection at `n_k1`.
pub fn sp_empirical_sinr(
    y: &[Vec<C64>],
    symbols: &[Vec<C64>],
    ch: &ChannelSet,
    noise_power: f64,
) -> Result<Vec<EmpiricalSinr>> {
    let kk = ch.num_users();
    let detect: Vec<usize> = (0..kk).map(|k| ch.path(k, 0).delay).collect();
    let lags: Vec<Vec<Vec<usize>>> = (0..kk)
        .map(|k| (0..kk).map(|_| ch.paths(k).iter().map(|p| p.delay).collect()).collect())
        .collect();
    empirical_sinr_at_lags(y, symbols, &detect, &lags, ch.overall_max_delay(), noise_power)
}

/// Per-user, per-sub-carrier precoders `d_{k,m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmBeamformerSet {
    beams: Vec<Vec<CVector>>,
}

impl OfdmBeamformerSet {
    pub fn new(ofdm: &OfdmChannel, beams: Vec<Vec<CVector>>) -> Result<Self> {
        let ok = beams.len() == ofdm.num_users()
            && beams
                .iter()
                .all(|b| b.len() == ofdm.num_subcarriers() && b.iter().all(|v| v.len() == ofdm.num_antennas()));
        if !ok {
            return Err(DamError::DimensionMismatch("OFDM beams must be K x M vectors of length M_t".into()));
        }
        Ok(Self { beams })
    }

    pub fn beam(&self, k: usize, m: usize) -> &CVector {
        &self.beams[k][m]
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.beams.first().map(Vec::len).unwrap_or(0)
    }

    pub fn num_antennas(&self) -> usize {
        self.beams.first().and_then(|b| b.first()).map(|v| v.len()).unwrap_or(0)
    }

    /// Total power over all sub-carriers; the budget is `M P`.
    pub fn total_power(&self) -> f64 {
        self.beams.iter().flatten().map(|v| v.norm_squared()).sum()
    }
}

/// `reports[k][m]` with IUI only; ISI is absorbed by the cyclic prefix.
pub fn ofdm_sinr(ofdm: &OfdmChannel, beams: &OfdmBeamformerSet) -> Result<Vec<Vec<SinrReport>>> {
    if beams.num_users() != ofdm.num_users() || beams.num_subcarriers() != ofdm.num_subcarriers() {
        return Err(DamError::ContractViolation("beams do not match the OFDM channel".into()));
    }
    let noise = ofdm.subcarrier_noise_power();
    Ok((0..ofdm.num_users())
        .map(|k| {
            (0..ofdm.num_subcarriers())
                .map(|m| {
                    let h = ofdm.gain(k, m);
                    let desired = h.dotc(beams.beam(k, m)).norm_sqr();
                    let iui = (0..ofdm.num_users())
                        .filter(|&o| o != k)
                        .map(|o| h.dotc(beams.beam(o, m)).norm_sqr())
                        .sum();
                    SinrReport::new(desired, 0.0, iui, noise)
                })
                .collect()
        })
        .collect())
}

/// `(1/M) sum_k sum_m log2(1 + SINR_km)`, before cyclic-prefix overhead.
pub fn ofdm_raw_rate(reports: &[Vec<SinrReport>]) -> f64 {
    let m = reports.first().map(Vec::len).unwrap_or(1).max(1);
    reports.iter().flatten().map(SinrReport::rate).sum::<f64>() / m as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSolution {
    pub beams: OfdmBeamformerSet,
    pub reports: Vec<Vec<SinrReport>>,
    pub trace: Vec<f64>,
}

impl OfdmSolution {
    fn scored(ofdm: &OfdmChannel, beams: OfdmBeamformerSet) -> Result<Self> {
        let reports = ofdm_sinr(ofdm, &beams)?;
        let trace = vec![ofdm_raw_rate(&reports)];
        Ok(Self { beams, reports, trace })
    }

    /// `(1/M) sum log2(1 + SINR)`.
    pub fn raw_rate(&self) -> f64 {
        ofdm_raw_rate(&self.reports)
    }

    pub fn sinr(&self) -> Vec<Vec<f64>> {
        self.reports.iter().map(|r| r.iter().map(|x| x.sinr).collect()).collect()
    }
}

/// `d_km = sqrt(M P) h_km / |H^|_F`.
pub fn ofdm_mrt(ofdm: &OfdmChannel, p: f64) -> Result<OfdmSolution> {
    check_power(p)?;
    let total = ofdm.num_subcarriers() as f64 * p;
    let c = Complex64::new((total / ofdm.frobenius_norm_squared()).sqrt(), 0.0);
    let beams = (0..ofdm.num_users())
        .map(|k| ofdm.user_gains(k).iter().map(|h| h * c).collect())
        .collect();
    OfdmSolution::scored(ofdm, OfdmBeamformerSet::new(ofdm, beams)?)
}

fn subcarrier_matrix(ofdm: &OfdmChannel, m: usize) -> CMatrix {
    let cols: Vec<CVector> = (0..ofdm.num_users()).map(|k| ofdm.gain(k, m).clone()).collect();
    CMatrix::from_columns(&cols)
}

/// Per-sub-carrier ZF with water-filling over all `(k, m)` under budget `M P`.
pub fn ofdm_zf(ofdm: &OfdmChannel, p: f64) -> Result<OfdmSolution> {
    check_power(p)?;
    let (kk, mm) = (ofdm.num_users(), ofdm.num_subcarriers());
    if ofdm.num_antennas() < kk {
        return Err(DamError::InfeasibleZf(format!(
            "{} antennas cannot separate {kk} users",
            ofdm.num_antennas()
        )));
    }
    let mut dirs = vec![Vec::with_capacity(mm); kk];
    for m in 0..mm {
        let b = zf_directions(&subcarrier_matrix(ofdm, m))?;
        for (k, d) in dirs.iter_mut().enumerate() {
            d.push(b.column(k).into_owned());
        }
    }
    let noise = ofdm.subcarrier_noise_power();
    let inv: Vec<f64> = dirs.iter().flatten().map(|b| noise * b.norm_squared()).collect();
    let alloc = water_fill(&inv, mm as f64 * p)?;
    let beams = dirs
        .iter()
        .enumerate()
        .map(|(k, dk)| {
            dk.iter()
                .enumerate()
                .map(|(m, b)| b * Complex64::new((alloc[k * mm + m] / b.norm_squared()).sqrt(), 0.0))
                .collect()
        })
        .collect();
    OfdmSolution::scored(ofdm, OfdmBeamformerSet::new(ofdm, beams)?)
}

/// Unit directions from `H_m (H_m^H H_m + eps I)^-1`, `eps = K sigma^2_sc / P`.
pub fn ofdm_rzf_directions(ofdm: &OfdmChannel, p: f64) -> Result<Vec<Vec<CVector>>> {
    check_power(p)?;
    let kk = ofdm.num_users();
    let eps = kk as f64 * ofdm.subcarrier_noise_power() / p;
    let mut dirs = vec![Vec::with_capacity(ofdm.num_subcarriers()); kk];
    for m in 0..ofdm.num_subcarriers() {
        let d = regularized_directions(&subcarrier_matrix(ofdm, m), eps);
        for (k, dk) in dirs.iter_mut().enumerate() {
            let c = d.column(k);
            dk.push(c / Complex64::new(c.norm(), 0.0));
        }
    }
    Ok(dirs)
}

/// Sub-carrier RZF with SCA over all `K M` powers; phases stay zero.
pub fn ofdm_rzf(ofdm: &OfdmChannel, p: f64, settings: &SolverSettings) -> Result<OfdmSolution> {
    let dirs = ofdm_rzf_directions(ofdm, p)?;
    let (kk, mm) = (ofdm.num_users(), ofdm.num_subcarriers());
    let var = |k: usize, m: usize| m * kk + k;
    let mut terms = Vec::with_capacity(kk * mm);
    for m in 0..mm {
        for k in 0..kk {
            let h = ofdm.gain(k, m);
            let gains: Vec<f64> = (0..kk).map(|o| h.dotc(&dirs[o][m]).norm_sqr()).collect();
            terms.push(RateTerm {
                weight: 1.0 / mm as f64,
                signal: (0..kk).map(|o| (var(o, m), gains[o])).collect(),
                interference: (0..kk).filter(|&o| o != k).map(|o| (var(o, m), gains[o])).collect(),
            });
        }
    }
    let problem = PowerAllocation {
        terms,
        num_vars: kk * mm,
        budget: mm as f64 * p,
        noise_power: ofdm.subcarrier_noise_power(),
        settings: settings.clone(),
    };
    let out = sca_drive(&problem, problem.equal_split(), settings)?;
    let beams = (0..kk)
        .map(|k| {
            (0..mm)
                .map(|m| &dirs[k][m] * Complex64::new(out.point[var(k, m)].sqrt(), 0.0))
                .collect()
        })
        .collect();
    let mut sol = OfdmSolution::scored(ofdm, OfdmBeamformerSet::new(ofdm, beams)?)?;
    sol.trace = out.trace;
    Ok(sol)
}
