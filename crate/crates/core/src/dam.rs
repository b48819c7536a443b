//! Delay alignment modulation: delay plan, per-path beams, effective-channel
//! bank, analytic SINR and a sample-level waveform simulator.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelSet;
use crate::error::{DamError, Result};
use crate::{CMatrix, CVector, C64};

/// Minimum number of post-transient samples [`empirical_sinr`] accepts.
pub const MIN_EMPIRICAL_SAMPLES: usize = 10_000;

/// Per-path pre-compensation delays `kappa_kl = n_k,max - n_kl`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayPlan {
    pub kappa: Vec<Vec<usize>>,
    pub max_delay: Vec<usize>,
}

impl DelayPlan {
    pub fn max_kappa(&self) -> usize {
        self.kappa.iter().flatten().copied().max().unwrap_or(0)
    }
}

pub fn delay_plan(ch: &ChannelSet) -> DelayPlan {
    let max_delay: Vec<usize> = (0..ch.num_users()).map(|k| ch.max_delay(k)).collect();
    let kappa = (0..ch.num_users())
        .map(|k| ch.paths(k).iter().map(|p| max_delay[k] - p.delay).collect())
        .collect();
    DelayPlan { kappa, max_delay }
}

/// Stacked per-path beams `f_k = [f_k1; ...; f_kL_k]` with their delay plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBeamformerSet {
    beams: Vec<CVector>,
    plan: DelayPlan,
    num_antennas: usize,
}

impl PathBeamformerSet {
    pub fn new(ch: &ChannelSet, beams: Vec<CVector>) -> Result<Self> {
        if beams.len() != ch.num_users() {
            return Err(DamError::DimensionMismatch(format!(
                "{} beam stacks for {} users",
                beams.len(),
                ch.num_users()
            )));
        }
        let mt = ch.num_antennas();
        for (k, b) in beams.iter().enumerate() {
            let want = mt * ch.num_paths(k);
            if b.len() != want {
                return Err(DamError::DimensionMismatch(format!(
                    "user {k} beam stack has length {}, expected {want}",
                    b.len()
                )));
            }
        }
        Ok(Self { beams, plan: delay_plan(ch), num_antennas: mt })
    }

    /// Builds stacks from individual per-path blocks `blocks[k][l]`.
    pub fn from_blocks(ch: &ChannelSet, blocks: Vec<Vec<CVector>>) -> Result<Self> {
        let mt = ch.num_antennas();
        let mut beams = Vec::with_capacity(blocks.len());
        for (k, user) in blocks.into_iter().enumerate() {
            if user.iter().any(|b| b.len() != mt) {
                return Err(DamError::DimensionMismatch(format!("user {k} has a block of wrong length")));
            }
            let mut stack = CVector::zeros(mt * user.len());
            for (l, b) in user.iter().enumerate() {
                stack.rows_mut(l * mt, mt).copy_from(b);
            }
            beams.push(stack);
        }
        Self::new(ch, beams)
    }

    pub fn zeros(ch: &ChannelSet) -> Self {
        let beams = (0..ch.num_users())
            .map(|k| CVector::zeros(ch.num_antennas() * ch.num_paths(k)))
            .collect();
        Self { beams, plan: delay_plan(ch), num_antennas: ch.num_antennas() }
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_paths(&self, k: usize) -> usize {
        self.beams[k].len() / self.num_antennas
    }

    pub fn stack(&self, k: usize) -> &CVector {
        &self.beams[k]
    }

    pub fn stacks(&self) -> &[CVector] {
        &self.beams
    }

    pub fn block(&self, k: usize, l: usize) -> CVector {
        self.beams[k].rows(l * self.num_antennas, self.num_antennas).into_owned()
    }

    pub fn plan(&self) -> &DelayPlan {
        &self.plan
    }

    pub fn user_power(&self, k: usize) -> f64 {
        self.beams[k].norm_squared()
    }

    pub fn total_power(&self) -> f64 {
        self.beams.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let c = Complex64::new(factor, 0.0);
        Self {
            beams: self.beams.iter().map(|b| b * c).collect(),
            plan: self.plan.clone(),
            num_antennas: self.num_antennas,
        }
    }

    /// Errors when the total power exceeds `budget` by more than `1e-9`
    /// relative slack.
    pub fn check_budget(&self, budget: f64) -> Result<()> {
        let requested = self.total_power();
        if requested > budget * (1.0 + 1e-9) + 1e-300 {
            Err(DamError::PowerBudgetExceeded { requested, budget })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_against(&self, ch: &ChannelSet) -> Result<()> {
        let ok = self.beams.len() == ch.num_users()
            && self.num_antennas == ch.num_antennas()
            && (0..ch.num_users()).all(|k| self.beams[k].len() == ch.num_antennas() * ch.num_paths(k));
        if ok {
            Ok(())
        } else {
            Err(DamError::ContractViolation("beams do not match the channel set".into()))
        }
    }
}

/// One ordered user pair `(k, k')` of the effective-channel bank.
///
/// Column `i` (delay difference `n_kl - n_k'l'`) holds in block `l'` the
/// vector `h_kl` of the unique path `l` with that difference, or zero. Only
/// the nonzero `(l', l)` matches are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBank {
    pub user: usize,
    pub other: usize,
    pub min_diff: isize,
    pub max_diff: isize,
    /// `matches[c]` lists `(l', l)` for column `c`, i.e. difference `min_diff + c`.
    pub matches: Vec<Vec<(usize, usize)>>,
}

impl PairBank {
    pub fn num_columns(&self) -> usize {
        self.matches.len()
    }

    pub fn diff(&self, col: usize) -> isize {
        self.min_diff + col as isize
    }

    pub fn column_of(&self, diff: isize) -> Option<usize> {
        (self.min_diff..=self.max_diff).contains(&diff).then(|| (diff - self.min_diff) as usize)
    }

    /// Whether column `col` is the aligned self-pair column left out of ISI.
    pub fn is_desired_column(&self, col: usize) -> bool {
        self.user == self.other && self.diff(col) == 0
    }

    /// Dense column `g_kk'[i]` of length `M_t * L_k'`.
    pub fn column(&self, ch: &ChannelSet, col: usize) -> CVector {
        let mt = ch.num_antennas();
        let mut v = CVector::zeros(mt * ch.num_paths(self.other));
        for &(lp, l) in &self.matches[col] {
            v.rows_mut(lp * mt, mt).copy_from(&ch.path(self.user, l).gain);
        }
        v
    }

    /// Dense `G_kk'`, one column per delay difference.
    pub fn matrix(&self, ch: &ChannelSet) -> CMatrix {
        let rows = ch.num_antennas() * ch.num_paths(self.other);
        let mut g = CMatrix::zeros(rows, self.num_columns());
        for c in 0..self.num_columns() {
            g.set_column(c, &self.column(ch, c));
        }
        g
    }

    /// `G_kk'^H f_k'` computed from the sparse matches.
    pub fn adjoint_apply(&self, ch: &ChannelSet, beams: &PathBeamformerSet) -> CVector {
        let f = beams.stack(self.other);
        let mt = ch.num_antennas();
        CVector::from_fn(self.num_columns(), |c, _| {
            self.matches[c]
                .iter()
                .map(|&(lp, l)| ch.path(self.user, l).gain.dotc(&f.rows(lp * mt, mt)))
                .sum()
        })
    }
}

/// Effective channels for every ordered user pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelBank {
    pairs: Vec<Vec<PairBank>>,
}

impl EffectiveChannelBank {
    pub fn pair(&self, k: usize, other: usize) -> &PairBank {
        &self.pairs[k][other]
    }

    pub fn num_users(&self) -> usize {
        self.pairs.len()
    }
}

pub fn effective_channel_bank(ch: &ChannelSet) -> EffectiveChannelBank {
    let kk = ch.num_users();
    let pairs = (0..kk)
        .map(|k| {
            (0..kk)
                .map(|other| {
                    let min_diff = ch.min_delay(k) as isize - ch.max_delay(other) as isize;
                    let max_diff = ch.max_delay(k) as isize - ch.min_delay(other) as isize;
                    let mut matches = vec![Vec::new(); (max_diff - min_diff + 1) as usize];
                    for (lp, q) in ch.paths(other).iter().enumerate() {
                        for (l, p) in ch.paths(k).iter().enumerate() {
                            let d = p.delay as isize - q.delay as isize;
                            matches[(d - min_diff) as usize].push((lp, l));
                        }
                    }
                    for m in &mut matches {
                        m.sort_unstable();
                    }
                    PairBank { user: k, other, min_diff, max_diff, matches }
                })
                .collect()
        })
        .collect();
    EffectiveChannelBank { pairs }
}

/// Per-user power decomposition at the single-tap detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub desired_power: f64,
    pub isi_power: f64,
    pub iui_power: f64,
    pub noise_power: f64,
    pub sinr: f64,
}

impl SinrReport {
    pub fn new(desired_power: f64, isi_power: f64, iui_power: f64, noise_power: f64) -> Self {
        let sinr = desired_power / (isi_power + iui_power + noise_power);
        Self { desired_power, isi_power, iui_power, noise_power, sinr }
    }

    pub fn interference_power(&self) -> f64 {
        self.isi_power + self.iui_power
    }

    /// `(isi + iui) / desired`; infinite when nothing is received.
    pub fn interference_ratio(&self) -> f64 {
        self.interference_power() / self.desired_power
    }

    pub fn rate(&self) -> f64 {
        (1.0 + self.sinr).log2()
    }
}

/// Analytic SINR of every user under DAM with single-tap detection at
/// delay `n_k,max`.
pub fn dam_sinr(ch: &ChannelSet, beams: &PathBeamformerSet) -> Result<Vec<SinrReport>> {
    beams.check_against(ch)?;
    let bank = effective_channel_bank(ch);
    Ok((0..ch.num_users()).map(|k| dam_sinr_user(ch, &bank, beams, k)).collect())
}

pub(crate) fn dam_sinr_user(
    ch: &ChannelSet,
    bank: &EffectiveChannelBank,
    beams: &PathBeamformerSet,
    k: usize,
) -> SinrReport {
    let mut desired = 0.0;
    let mut isi = 0.0;
    let mut iui = 0.0;
    for other in 0..ch.num_users() {
        let pair = bank.pair(k, other);
        let taps = pair.adjoint_apply(ch, beams);
        for (c, t) in taps.iter().enumerate() {
            if other != k {
                iui += t.norm_sqr();
            } else if pair.is_desired_column(c) {
                desired = t.norm_sqr();
            } else {
                isi += t.norm_sqr();
            }
        }
    }
    SinrReport::new(desired, isi, iui, ch.noise_power())
}

/// Per-antenna transmit samples `x[n] = sum_k sum_l f_kl s_k[n - kappa_kl]`
/// for `n` in `0..horizon`, as an `M_t x horizon` matrix.
pub fn transmit_waveform(
    beams: &PathBeamformerSet,
    symbols: &[Vec<C64>],
    horizon: usize,
) -> Result<CMatrix> {
    check_symbols(beams, symbols, horizon)?;
    let mt = beams.num_antennas();
    let mut x = CMatrix::zeros(mt, horizon);
    for (k, s) in symbols.iter().enumerate().take(beams.num_users()) {
        for (l, &kappa) in beams.plan().kappa[k].iter().enumerate() {
            let f = beams.block(k, l);
            for n in kappa..horizon {
                let sym = s[n - kappa];
                let mut col = x.column_mut(n);
                col.axpy(sym, &f, C64::new(1.0, 0.0));
            }
        }
    }
    Ok(x)
}

/// Transmit samples of a single antenna, without building the full matrix.
pub fn transmit_waveform_antenna(
    beams: &PathBeamformerSet,
    symbols: &[Vec<C64>],
    horizon: usize,
    antenna: usize,
) -> Result<Vec<C64>> {
    check_symbols(beams, symbols, horizon)?;
    let mt = beams.num_antennas();
    if antenna >= mt {
        return Err(DamError::IndexOutOfRange { index: antenna, len: mt });
    }
    let mut x = vec![C64::new(0.0, 0.0); horizon];
    for (k, s) in symbols.iter().enumerate().take(beams.num_users()) {
        for (l, &kappa) in beams.plan().kappa[k].iter().enumerate() {
            let w = beams.stack(k)[l * mt + antenna];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for n in kappa..horizon {
                x[n] += w * s[n - kappa];
            }
        }
    }
    Ok(x)
}

fn check_symbols(beams: &PathBeamformerSet, symbols: &[Vec<C64>], horizon: usize) -> Result<()> {
    if symbols.len() != beams.num_users() {
        return Err(DamError::DimensionMismatch(format!(
            "{} symbol streams for {} users",
            symbols.len(),
            beams.num_users()
        )));
    }
    if let Some(s) = symbols.iter().find(|s| s.len() < horizon) {
        return Err(DamError::DimensionMismatch(format!(
            "symbol stream of length {} shorter than horizon {horizon}",
            s.len()
        )));
    }
    Ok(())
}

/// Seeded complex AWGN of the given variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub power: f64,
    pub seed: u64,
}

/// `y_k[n] = sum_l h_kl^H x[n - n_kl]`, plus optional AWGN.
pub fn received_waveform(ch: &ChannelSet, x: &CMatrix, noise: Option<NoiseSpec>) -> Result<Vec<Vec<C64>>> {
    if x.nrows() != ch.num_antennas() {
        return Err(DamError::DimensionMismatch(format!(
            "waveform has {} antennas, channel has {}",
            x.nrows(),
            ch.num_antennas()
        )));
    }
    let horizon = x.ncols();
    let mut rng = noise.map(|n| ChaCha8Rng::seed_from_u64(n.seed));
    let mut out = Vec::with_capacity(ch.num_users());
    for k in 0..ch.num_users() {
        let mut y = vec![C64::new(0.0, 0.0); horizon];
        for p in ch.paths(k) {
            // row vector h^H X
            let proj = p.gain.adjoint() * x;
            for n in p.delay..horizon {
                y[n] += proj[n - p.delay];
            }
        }
        if let (Some(spec), Some(rng)) = (noise, rng.as_mut()) {
            let amp = (spec.power / 2.0).sqrt();
            for v in &mut y {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v += C64::new(re * amp, im * amp);
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Sample-based SINR estimate with the number of samples it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSinr {
    pub report: SinrReport,
    pub samples: usize,
}

/// Estimates each user's SINR from received samples.
///
/// The desired amplitude is the correlation of `y_k` with `s_k[n - n_k,max]`;
/// the residual after removing it, minus the known `noise_power`, is the
/// interference. Its ISI/IUI split follows from correlating against each
/// stream at every lag the channel and delay plan can produce, rescaled so
/// the two parts add up to the measured residual.
pub fn empirical_sinr(
    y: &[Vec<C64>],
    symbols: &[Vec<C64>],
    ch: &ChannelSet,
    beams: &PathBeamformerSet,
    noise_power: f64,
) -> Result<Vec<EmpiricalSinr>> {
    beams.check_against(ch)?;
    let plan = beams.plan();
    let kk = ch.num_users();
    // user k' reaches user k through path l and pre-delay kappa_k'l'
    let lags: Vec<Vec<Vec<usize>>> = (0..kk)
        .map(|k| {
            (0..kk)
                .map(|other| {
                    ch.paths(k)
                        .iter()
                        .flat_map(|p| plan.kappa[other].iter().map(move |&kp| p.delay + kp))
                        .collect()
                })
                .collect()
        })
        .collect();
    let transient = ch.overall_max_delay() + plan.max_kappa();
    empirical_sinr_at_lags(y, symbols, &plan.max_delay, &lags, transient, noise_power)
}

/// Shared estimator: user `k` is detected at lag `detect[k]`, and stream
/// `k'` can reach it at any of `lags[k][k']`. The first `transient` samples
/// are skipped.
pub fn empirical_sinr_at_lags(
    y: &[Vec<C64>],
    symbols: &[Vec<C64>],
    detect: &[usize],
    lags: &[Vec<Vec<usize>>],
    transient: usize,
    noise_power: f64,
) -> Result<Vec<EmpiricalSinr>> {
    let kk = detect.len();
    if y.len() != kk || symbols.len() != kk || lags.len() != kk {
        return Err(DamError::DimensionMismatch("one received and one symbol stream per user".into()));
    }
    let horizon = y.iter().chain(symbols).map(Vec::len).min().unwrap_or(0);
    let samples = horizon.saturating_sub(transient);
    if samples < MIN_EMPIRICAL_SAMPLES {
        return Err(DamError::EstimationQuality { got: samples, need: MIN_EMPIRICAL_SAMPLES });
    }
    let window = transient..horizon;
    let corr = |yk: &[C64], s: &[C64], lag: usize| -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for n in window.clone() {
            let sym = s[n - lag];
            num += yk[n] * sym.conj();
            den += sym.norm_sqr();
        }
        num / den
    };

    let mut out = Vec::with_capacity(kk);
    for k in 0..kk {
        let yk = &y[k][..horizon];
        let d = detect[k];
        let a = corr(yk, &symbols[k], d);
        let residual: f64 =
            window.clone().map(|n| (yk[n] - a * symbols[k][n - d]).norm_sqr()).sum::<f64>() / samples as f64;
        let interference = (residual - noise_power).max(0.0);
        let symbol_power: f64 = window.clone().map(|n| symbols[k][n - d].norm_sqr()).sum::<f64>() / samples as f64;

        let mut isi_taps = 0.0;
        let mut iui_taps = 0.0;
        for (other, s) in symbols.iter().enumerate() {
            let mut ls = lags[k][other].clone();
            ls.sort_unstable();
            ls.dedup();
            for lag in ls {
                if other == k && lag == d {
                    continue;
                }
                let t = corr(yk, s, lag).norm_sqr();
                if other == k {
                    isi_taps += t;
                } else {
                    iui_taps += t;
                }
            }
        }
        let tap_total = isi_taps + iui_taps;
        let (isi, iui) = if tap_total > 0.0 {
            (interference * isi_taps / tap_total, interference * iui_taps / tap_total)
        } else {
            (0.0, interference)
        };
        out.push(EmpiricalSinr {
            report: SinrReport::new(a.norm_sqr() * symbol_power, isi, iui, noise_power),
            samples,
        });
    }
    Ok(out)
}
