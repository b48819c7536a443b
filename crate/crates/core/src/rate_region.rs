//! Pareto boundary of the achievable rate region.
//!
//! Single-carrier schemes (DAM and strongest-path) use bisection on the
//! common rate scale with an SINR-constrained power-minimization feasibility
//! probe. OFDM uses successive convex approximation over the sub-carrier
//! beams directly.

use std::f64::consts::LN_2;

use crate::benchmarks::{ofdm_sinr, sp_sinr, OfdmBeamformerSet, SpBeamformerSet};
use crate::channel::{ChannelSet, OfdmChannel};
use crate::conic::program::{Affine, Cone, ConeProgram};
use crate::conic::sca::check_inexact_step;
use crate::conic::{sca_drive, solve_power_min_socp, ScaProblem, SocpInstance, SolveStatus, SolverSettings};
use crate::dam::{dam_sinr, PathBeamformerSet, SinrReport};
use crate::error::{DamError, Result};
use crate::{CVector, C64};

/// Bisection gives up after this many probes even if the width test fails.
const MAX_BISECTION_STEPS: usize = 100;

/// Direction on the rate simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    alpha: Vec<f64>,
}

impl RateProfile {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(DamError::EmptyInput("rate profile"));
        }
        if alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(DamError::InvalidConfig(format!("rate profile entries must be nonnegative: {alpha:?}")));
        }
        let sum: f64 = alpha.iter().sum();
        if sum == 0.0 {
            return Err(DamError::InvalidConfig("rate profile is all zero".into()));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DamError::InvalidConfig(format!("rate profile sums to {sum}, not 1")));
        }
        Ok(Self { alpha })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(DamError::InvalidConfig("rate profile is all zero".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// All profiles whose entries are multiples of `1 / divisions`, in
    /// lexicographic order of the entry counts with the last user varying
    /// slowest. For two users this walks `alpha_1` from 0 to 1.
    pub fn simplex_grid(num_users: usize, divisions: usize) -> Result<Vec<Self>> {
        if num_users == 0 || divisions == 0 {
            return Err(DamError::InvalidConfig("grid needs at least one user and one division".into()));
        }
        let mut out = Vec::new();
        let mut counts = vec![0usize; num_users];
        compositions(divisions, 0, &mut counts, &mut |c| {
            let alpha = c.iter().map(|&n| n as f64 / divisions as f64).collect();
            out.push(Self { alpha });
        });
        Ok(out)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn num_users(&self) -> usize {
        self.alpha.len()
    }

    fn check_users(&self, k: usize) -> Result<()> {
        if self.alpha.len() != k {
            return Err(DamError::DimensionMismatch(format!(
                "rate profile has {} entries for {k} users",
                self.alpha.len()
            )));
        }
        Ok(())
    }
}

fn compositions(left: usize, pos: usize, counts: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        // reversed so the first user's share grows fastest
        let rev: Vec<usize> = counts.iter().rev().copied().collect();
        emit(&rev);
        return;
    }
    for n in (0..=left).rev() {
        counts[pos] = n;
        compositions(left - n, pos + 1, counts, emit);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointBeams {
    Dam(PathBeamformerSet),
    StrongestPath(SpBeamformerSet),
    Ofdm(OfdmBeamformerSet),
}

/// One boundary point found along a rate profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub alpha: Vec<f64>,
    /// Per-user rates re-scored from `beams`, bits/s/Hz without guard overhead.
    pub rates: Vec<f64>,
    /// Common rate scale; the boundary point is `alpha * r_star`.
    pub r_star: f64,
    pub beams: PointBeams,
    pub status: SolveStatus,
    /// Bisection probes or accepted SCA steps.
    pub iterations: usize,
    /// Bisection: feasible lower bound after each probe. SCA: objective trace.
    pub trace: Vec<f64>,
}

impl ParetoPoint {
    /// Rates and scale multiplied by an overhead factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.rates.iter_mut().for_each(|r| *r *= factor);
        p.r_star *= factor;
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateRegionTrace {
    pub points: Vec<ParetoPoint>,
}

/// Runs `point` for every profile in `grid`, keeping the grid order.
pub fn trace_region<F>(grid: &[RateProfile], mut point: F) -> Result<RateRegionTrace>
where
    F: FnMut(&RateProfile) -> Result<ParetoPoint>,
{
    if grid.is_empty() {
        return Err(DamError::EmptyInput("rate profile grid"));
    }
    let points = grid.iter().map(&mut point).collect::<Result<Vec<_>>>()?;
    Ok(RateRegionTrace { points })
}

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(DamError::InvalidConfig(format!("transmit power must be positive, got {p}")))
    }
}

/// Outcome of one bisection run before the beams are wrapped.
struct Bisection {
    r_star: f64,
    beams: Vec<CVector>,
    status: SolveStatus,
    probes: usize,
    trace: Vec<f64>,
}

/// Largest `R` for which the power-min problem with targets
/// `2^(alpha_k R) - 1` needs at most `p`. `upper[k]` bounds user `k`'s rate.
fn bisect(
    build: impl Fn(Vec<f64>) -> Result<SocpInstance>,
    alpha: &RateProfile,
    upper: &[f64],
    p: f64,
    settings: &SolverSettings,
) -> Result<Bisection> {
    settings.validate()?;
    let a = alpha.alpha();
    let mut hi = a
        .iter()
        .zip(upper)
        .filter(|(ak, _)| **ak > 0.0)
        .map(|(ak, u)| u / ak)
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    let zero = build(vec![0.0; a.len()])?;
    let mut best = solve_power_min_socp(&zero, settings)?;
    let mut trace = vec![lo];
    let mut probes = 0;
    let mut last_status = SolveStatus::Optimal;
    if !(hi > 0.0) {
        // no user can carry any rate
        return Ok(Bisection { r_star: 0.0, beams: best.beams, status: SolveStatus::Infeasible, probes, trace });
    }
    while hi - lo > settings.bisection_epsilon * lo && probes < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let targets = a.iter().map(|ak| (ak * mid).exp2() - 1.0).collect();
        let sol = solve_power_min_socp(&build(targets)?, settings)?;
        probes += 1;
        if sol.status.is_optimal() && sol.total_power <= p {
            lo = mid;
            best = sol;
        } else {
            if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::Infeasible) {
                last_status = sol.status;
                log::warn!("power-min probe at R = {mid} ended {}", sol.status.as_str());
            }
            hi = mid;
        }
        trace.push(lo);
    }
    let status = if lo > 0.0 {
        SolveStatus::Optimal
    } else if last_status != SolveStatus::Optimal {
        last_status
    } else {
        SolveStatus::Infeasible
    };
    Ok(Bisection { r_star: lo, beams: best.beams, status, probes, trace })
}

fn rates(reports: &[SinrReport]) -> Vec<f64> {
    reports.iter().map(SinrReport::rate).collect()
}

/// Boundary point of the DAM region along `alpha` for total power `p`.
pub fn dam_pareto_point(
    ch: &ChannelSet,
    alpha: &RateProfile,
    p: f64,
    settings: &SolverSettings,
) -> Result<ParetoPoint> {
    check_power(p)?;
    alpha.check_users(ch.num_users())?;
    let sigma2 = ch.noise_power();
    let upper: Vec<f64> = (0..ch.num_users()).map(|k| (1.0 + p * ch.user_gain(k) / sigma2).log2()).collect();
    let b = bisect(|t| SocpInstance::dam(ch, t), alpha, &upper, p, settings)?;
    let beams = PathBeamformerSet::new(ch, b.beams)?;
    Ok(ParetoPoint {
        alpha: alpha.alpha().to_vec(),
        rates: rates(&dam_sinr(ch, &beams)?),
        r_star: b.r_star,
        beams: PointBeams::Dam(beams),
        status: b.status,
        iterations: b.probes,
        trace: b.trace,
    })
}

/// Same as [`dam_pareto_point`] with one beam per user toward its strongest
/// path and all other paths treated as interference.
pub fn sp_pareto_point(
    ch: &ChannelSet,
    alpha: &RateProfile,
    p: f64,
    settings: &SolverSettings,
) -> Result<ParetoPoint> {
    check_power(p)?;
    alpha.check_users(ch.num_users())?;
    let sigma2 = ch.noise_power();
    let upper: Vec<f64> =
        (0..ch.num_users()).map(|k| (1.0 + p * ch.path(k, 0).gain.norm_squared() / sigma2).log2()).collect();
    let b = bisect(|t| SocpInstance::strongest_path(ch, t), alpha, &upper, p, settings)?;
    let beams = SpBeamformerSet::new(ch, b.beams)?;
    Ok(ParetoPoint {
        alpha: alpha.alpha().to_vec(),
        rates: rates(&sp_sinr(ch, &beams)?),
        r_star: b.r_star,
        beams: PointBeams::StrongestPath(beams),
        status: b.status,
        iterations: b.probes,
        trace: b.trace,
    })
}

/// OFDM region point as an SCA problem over the sub-carrier beams.
///
/// Beams are stored as `y = d / sqrt(P)` so the power constraint reads
/// `|y|^2 <= M`, and channels as `h sqrt(P) / sigma` so the noise is one.
struct OfdmRegion<'a> {
    gains: Vec<Vec<CVector>>,
    alpha: &'a [f64],
    num_antennas: usize,
    settings: &'a SolverSettings,
}

impl OfdmRegion<'_> {
    fn num_users(&self) -> usize {
        self.gains.len()
    }

    fn num_subcarriers(&self) -> usize {
        self.gains[0].len()
    }

    fn active(&self, k: usize) -> bool {
        self.alpha[k] > 0.0
    }

    /// `sum_m log2(1 + SINR_km)` in noise-normalized units.
    fn user_rate(&self, y: &[Vec<CVector>], k: usize) -> f64 {
        (0..self.num_subcarriers())
            .map(|m| {
                let h = &self.gains[k][m];
                let mut desired = 0.0;
                let mut other = 0.0;
                for (o, yo) in y.iter().enumerate() {
                    let g = h.dotc(&yo[m]).norm_sqr();
                    if o == k {
                        desired = g;
                    } else {
                        other += g;
                    }
                }
                (1.0 + desired / (1.0 + other)).log2()
            })
            .sum()
    }

    fn power(y: &[Vec<CVector>]) -> f64 {
        y.iter().flatten().map(|v| v.norm_squared()).sum()
    }
}

impl ScaProblem for OfdmRegion<'_> {
    type Point = Vec<Vec<CVector>>;

    /// `min_k sum_m log2(1 + SINR_km) / (M alpha_k)` over active users.
    fn objective(&self, y: &Self::Point) -> f64 {
        let mm = self.num_subcarriers() as f64;
        (0..self.num_users())
            .filter(|&k| self.active(k))
            .map(|k| self.user_rate(y, k) / (mm * self.alpha[k]))
            .fold(f64::INFINITY, f64::min)
    }

    fn is_feasible(&self, y: &Self::Point) -> bool {
        let mm = self.num_subcarriers() as f64;
        y.len() == self.num_users()
            && y.iter().all(|u| u.len() == self.num_subcarriers() && u.iter().all(|v| v.len() == self.num_antennas))
            && y.iter().flatten().all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
            && Self::power(y) <= mm * (1.0 + 1e-9)
    }

    fn solve_surrogate(&self, y0: &Self::Point) -> Result<Self::Point> {
        let (kk, mm, mt) = (self.num_users(), self.num_subcarriers(), self.num_antennas);
        let active: Vec<usize> = (0..kk).filter(|&k| self.active(k)).collect();
        let mut prog = ConeProgram::new();
        let mu = prog.add_vars(1);
        prog.add_linear_cost(mu, -1.0);

        // interleaved re/im beam variables for active users only
        let mut beam = vec![vec![usize::MAX; mm]; kk];
        for &k in &active {
            for slot in beam[k].iter_mut() {
                *slot = prog.add_vars(2 * mt);
            }
        }
        let re_im = |h: &CVector, off: usize| -> (Affine, Affine) {
            // h^H y with y = u + j v
            let mut re = Vec::with_capacity(2 * mt);
            let mut im = Vec::with_capacity(2 * mt);
            for (i, c) in h.iter().enumerate() {
                re.push((off + 2 * i, c.re));
                re.push((off + 2 * i + 1, c.im));
                im.push((off + 2 * i, -c.im));
                im.push((off + 2 * i + 1, c.re));
            }
            (Affine::new(re, 0.0), Affine::new(im, 0.0))
        };

        let mut rate_rows: Vec<Affine> = Vec::with_capacity(kk);
        for &k in &active {
            let mut row = Affine::constant(0.0);
            for m in 0..mm {
                let h = &self.gains[k][m];
                let z0: Vec<C64> = active.iter().map(|&o| h.dotc(&y0[o][m])).collect();
                // Received and interference-plus-noise power at the current
                // point; the slacks are stored relative to them.
                let r0 = 1.0 + z0.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let c0: f64 = active.iter().zip(&z0).filter(|(&o, _)| o != k).map(|(_, z)| z.norm_sqr()).sum();
                let q0 = 1.0 + c0;
                let s = prog.add_vars(active.len());
                let mut total = Affine::constant(1.0 / r0);
                let mut c_terms = Affine::constant(0.0);
                for (j, &o) in active.iter().enumerate() {
                    let (re, im) = re_im(h, beam[o][m]);
                    // (2 Re(conj(z0) z) - |z0|^2) / r0 - S >= 0
                    let tangent = re
                        .clone()
                        .scaled(2.0 * z0[j].re / r0)
                        .plus(&im.clone().scaled(2.0 * z0[j].im / r0))
                        .plus(&Affine::new(vec![(s + j, -1.0)], -z0[j].norm_sqr() / r0));
                    prog.add(Cone::Nonneg, vec![tangent]);
                    total = total.plus(&Affine::var(s + j));
                    if o != k {
                        // C >= |z|^2 / q0
                        let c = prog.add_vars(1);
                        let w = 1.0 / q0.sqrt();
                        prog.add_squared_norm_le(vec![re.scaled(w), im.scaled(w)], Affine::var(c));
                        c_terms = c_terms.plus(&Affine::var(c));
                    }
                }
                // t <= ln(received / r0)
                let t = prog.add_vars(1);
                prog.add_log_le(Affine::var(t), total);
                // ln r0 + t - ln q0 - (q0 C - c0) / q0
                row = row
                    .plus(&Affine::var(t))
                    .plus(&c_terms.scaled(-1.0))
                    .plus(&Affine::constant(r0.ln() - q0.ln() + c0 / q0));
            }
            row = row.plus(&Affine::new(vec![(mu, -(mm as f64) * self.alpha[k] * LN_2)], 0.0));
            rate_rows.push(row);
        }
        prog.add(Cone::Nonneg, rate_rows);

        let all: Vec<Affine> = active
            .iter()
            .flat_map(|&k| beam[k].iter().flat_map(|&off| (0..2 * mt).map(move |i| Affine::var(off + i))))
            .collect();
        prog.add_soc(Affine::constant((mm as f64).sqrt()), all);

        let sol = prog.solve(self.settings)?;
        if !sol.status.is_optimal() {
            return Err(DamError::Solver(format!("OFDM region surrogate ended {}", sol.status.as_str())));
        }
        let mut y: Vec<Vec<CVector>> = (0..kk)
            .map(|k| {
                (0..mm)
                    .map(|m| {
                        if !self.active(k) {
                            return CVector::zeros(mt);
                        }
                        let off = beam[k][m];
                        CVector::from_fn(mt, |i, _| C64::new(sol.x[off + 2 * i], sol.x[off + 2 * i + 1]))
                    })
                    .collect()
            })
            .collect();
        let power = Self::power(&y);
        if power > mm as f64 {
            let f = C64::new((mm as f64 / power).sqrt(), 0.0);
            y.iter_mut().flatten().for_each(|v| *v *= f);
        }
        check_inexact_step(self, y0, y, sol.reduced_accuracy)
    }
}

/// Boundary point of the OFDM region along `alpha` for per-symbol average
/// power `p` (total `M p` over sub-carriers). `r_star` is the common rate
/// scale without cyclic-prefix overhead.
pub fn ofdm_pareto_point(
    ofdm: &OfdmChannel,
    alpha: &RateProfile,
    p: f64,
    settings: &SolverSettings,
) -> Result<ParetoPoint> {
    check_power(p)?;
    alpha.check_users(ofdm.num_users())?;
    let (kk, mm, mt) = (ofdm.num_users(), ofdm.num_subcarriers(), ofdm.num_antennas());
    let g = C64::new((p / ofdm.subcarrier_noise_power()).sqrt(), 0.0);
    let gains: Vec<Vec<CVector>> =
        (0..kk).map(|k| ofdm.user_gains(k).iter().map(|h| h * g).collect()).collect();
    let a = alpha.alpha();
    let num_active = a.iter().filter(|&&x| x > 0.0).count();

    // matched directions, equal power over active (user, sub-carrier) pairs
    let share = (1.0 / num_active as f64).sqrt();
    let init: Vec<Vec<CVector>> = (0..kk)
        .map(|k| {
            gains[k]
                .iter()
                .map(|h| {
                    let n = h.norm();
                    if a[k] > 0.0 && n > 0.0 {
                        h * C64::new(share / n, 0.0)
                    } else {
                        CVector::zeros(mt)
                    }
                })
                .collect()
        })
        .collect();

    let problem = OfdmRegion { gains, alpha: a, num_antennas: mt, settings };
    let out = sca_drive(&problem, init, settings)?;
    let scale = C64::new(p.sqrt(), 0.0);
    let beams: Vec<Vec<CVector>> =
        out.point.iter().map(|u| u.iter().map(|y| y * scale).collect()).collect();
    let beams = OfdmBeamformerSet::new(ofdm, beams)?;
    let reports = ofdm_sinr(ofdm, &beams)?;
    let rates = reports
        .iter()
        .map(|r| r.iter().map(SinrReport::rate).sum::<f64>() / mm as f64)
        .collect();
    Ok(ParetoPoint {
        alpha: a.to_vec(),
        rates,
        r_star: out.objective(),
        beams: PointBeams::Ofdm(beams),
        status: if out.converged { SolveStatus::Optimal } else { SolveStatus::MaxIterations },
        iterations: out.iterations,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ofdm_channel, steering_vector, synthesize_channel, GeometryConfig, Path};

    fn one_path(gains: Vec<CVector>, noise: f64) -> ChannelSet {
        ChannelSet::new(gains.into_iter().map(|g| vec![Path { gain: g, delay: 0 }]).collect(), noise).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(RateProfile::new(vec![0.0, 0.0]).is_err());
        assert!(RateProfile::new(vec![0.5, 0.4]).is_err());
        assert!(RateProfile::new(vec![-0.5, 1.5]).is_err());
        assert!(RateProfile::from_weights(&[0.0, 0.0]).is_err());
        assert_eq!(RateProfile::from_weights(&[1.0, 3.0]).unwrap().alpha(), &[0.25, 0.75]);
    }

    #[test]
    fn grid_shape() {
        let g = RateProfile::simplex_grid(2, 2).unwrap();
        let a: Vec<Vec<f64>> = g.iter().map(|p| p.alpha().to_vec()).collect();
        assert_eq!(a, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(RateProfile::simplex_grid(3, 4).unwrap().len(), 15);
        let fine = RateProfile::simplex_grid(3, 4).unwrap();
        for p in RateProfile::simplex_grid(3, 2).unwrap() {
            assert!(fine.contains(&p));
        }
    }

    #[test]
    fn single_user_hits_upper_bound() {
        let h = steering_vector(4, 0.5, 0.3) * C64::new(0.8, 0.2);
        let ch = one_path(vec![h.clone()], 0.1);
        let s = SolverSettings::default();
        let pt = dam_pareto_point(&ch, &RateProfile::new(vec![1.0]).unwrap(), 2.0, &s).unwrap();
        let cap = (1.0 + 2.0 * h.norm_squared() / 0.1).log2();
        assert!((pt.r_star - cap).abs() <= s.bisection_epsilon * cap);
        assert!(pt.r_star <= cap);
        let sp = sp_pareto_point(&ch, &RateProfile::new(vec![1.0]).unwrap(), 2.0, &s).unwrap();
        assert!((sp.r_star - pt.r_star).abs() < 1e-12);
    }

    #[test]
    fn degenerate_profile_gives_single_user_rate() {
        let cfg = GeometryConfig::uniform(8, 2, 2, 6, 5);
        let ch = synthesize_channel(&cfg, 1e-2).unwrap();
        let s = SolverSettings::default();
        let pt = dam_pareto_point(&ch, &RateProfile::new(vec![0.0, 1.0]).unwrap(), 1.0, &s).unwrap();
        let alone = dam_pareto_point(&ch.select_users(&[1]).unwrap(), &RateProfile::new(vec![1.0]).unwrap(), 1.0, &s)
            .unwrap();
        assert!((pt.r_star - alone.r_star).abs() <= 2.0 * s.bisection_epsilon * alone.r_star);
        assert_eq!(pt.rates[0], 0.0);
    }

    #[test]
    fn ofdm_flat_single_user() {
        let h = steering_vector(3, 0.5, -0.4) * C64::new(0.5, 0.5);
        let ofdm = OfdmChannel::from_gains(vec![vec![h.clone()]], 0.2).unwrap();
        let pt = ofdm_pareto_point(&ofdm, &RateProfile::new(vec![1.0]).unwrap(), 1.5, &SolverSettings::default())
            .unwrap();
        let cap = (1.0 + 1.5 * h.norm_squared() / 0.2).log2();
        assert!((pt.r_star - cap).abs() < 1e-3 * cap, "{} vs {cap}", pt.r_star);
    }

    #[test]
    fn ofdm_trace_monotone() {
        let cfg = GeometryConfig::uniform(4, 2, 2, 3, 11);
        let ch = synthesize_channel(&cfg, 1e-2).unwrap();
        let ofdm = ofdm_channel(&ch, 8).unwrap();
        let pt = ofdm_pareto_point(&ofdm, &RateProfile::new(vec![0.3, 0.7]).unwrap(), 1.0, &SolverSettings::default())
            .unwrap();
        assert!(pt.trace.windows(2).all(|w| w[1] >= w[0]));
        for (k, r) in pt.rates.iter().enumerate() {
            assert!(*r >= pt.alpha[k] * pt.r_star - 1e-6);
        }
    }
}
