//! Per-path DAM beamformers: MRT, ZF with water-filling, and RZF with
//! SCA-optimized amplitudes.

use num_complex::Complex64;

use crate::channel::{stack_user_channel, ChannelSet};
use crate::conic::program::{Affine, ConeProgram};
use crate::conic::sca::check_inexact_step;
use crate::conic::{sca_drive, water_fill, InterferenceModel, LinearForm, ScaProblem, SolverSettings};
use crate::dam::PathBeamformerSet;
use crate::error::{DamError, Result};
use crate::{CMatrix, CVector, C64};

/// `M_t x L_tot` matrix of all path vectors, user by user.
pub fn channel_matrix(ch: &ChannelSet) -> CMatrix {
    let cols: Vec<CVector> = (0..ch.num_users())
        .flat_map(|k| ch.paths(k).iter().map(|p| p.gain.clone()))
        .collect();
    CMatrix::from_columns(&cols)
}

/// Column offset of user `k`'s first path in [`channel_matrix`].
pub fn path_offset(ch: &ChannelSet, k: usize) -> usize {
    (0..k).map(|j| ch.num_paths(j)).sum()
}

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(DamError::InvalidConfig(format!("transmit power must be positive, got {p}")))
    }
}

/// `H (H^H H)^-1` through a thin SVD, with the full-column-rank test
/// `sigma_min > 1e-10 sigma_max`.
pub fn zf_directions(h: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = h.shape();
    if rows < cols {
        return Err(DamError::InfeasibleZf(format!(
            "{rows} antennas cannot null {cols} paths"
        )));
    }
    let svd = h.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    if !(smin > 1e-10 * smax) {
        return Err(DamError::InfeasibleZf(format!(
            "channel matrix is rank deficient (singular value ratio {:.3e})",
            smin / smax
        )));
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^H");
    let inv = CMatrix::from_diagonal(&s.map(|x| Complex64::new(1.0 / x, 0.0)));
    Ok(u * inv * vt)
}

/// `H (H^H H + eps I)^-1`, valid for any shape.
pub fn regularized_directions(h: &CMatrix, eps: f64) -> CMatrix {
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^H");
    let d = svd.singular_values.map(|x| Complex64::new(x / (x * x + eps), 0.0));
    u * CMatrix::from_diagonal(&d) * vt
}

/// Asymptotic per-path MRT: `f_kl = sqrt(p_k) h_kl / |h_k|`.
pub fn mrt_asymptotic(ch: &ChannelSet, per_user_power: &[f64], budget: f64) -> Result<PathBeamformerSet> {
    if per_user_power.len() != ch.num_users() {
        return Err(DamError::DimensionMismatch("one power per user".into()));
    }
    if per_user_power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(DamError::InvalidConfig("per-user powers must be nonnegative".into()));
    }
    let requested: f64 = per_user_power.iter().sum();
    if requested > budget * (1.0 + 1e-12) {
        return Err(DamError::PowerBudgetExceeded { requested, budget });
    }
    let beams = (0..ch.num_users())
        .map(|k| {
            let h = stack_user_channel(ch, k)?;
            let n = h.norm();
            Ok(if n > 0.0 { h * Complex64::new(per_user_power[k].sqrt() / n, 0.0) } else { h })
        })
        .collect::<Result<Vec<_>>>()?;
    PathBeamformerSet::new(ch, beams)
}

/// Water-filling over the interference-free SNRs `p_k |h_k|^2 / sigma^2`
/// the asymptotic regime reduces to.
pub fn asymptotic_power_allocation(ch: &ChannelSet, budget: f64) -> Result<Vec<f64>> {
    let inv: Vec<f64> = (0..ch.num_users()).map(|k| ch.noise_power() / ch.user_gain(k)).collect();
    water_fill(&inv, budget)
}

/// Per-path MRT with total power `P`: `f_kl = sqrt(P) h_kl / |H|_F`.
pub fn mrt_per_path(ch: &ChannelSet, p: f64) -> Result<PathBeamformerSet> {
    check_power(p)?;
    let fro = (0..ch.num_users()).map(|k| ch.user_gain(k)).sum::<f64>().sqrt();
    let c = Complex64::new(p.sqrt() / fro, 0.0);
    let beams = (0..ch.num_users()).map(|k| stack_user_channel(ch, k).map(|h| h * c)).collect::<Result<_>>()?;
    PathBeamformerSet::new(ch, beams)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZfSolution {
    pub beams: PathBeamformerSet,
    /// Power `P_k` water-filled to each user.
    pub user_power: Vec<f64>,
    /// Per-path power scalings `v_kl` applied to the pseudo-inverse columns.
    pub path_scaling: Vec<Vec<f64>>,
    /// Interference-free `(sum_l sqrt(v_kl))^2 / sigma^2`.
    pub snr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
}

impl ZfSolution {
    pub fn sum_rate(&self) -> f64 {
        self.per_user_rate.iter().sum()
    }
}

/// Per-path ZF: columns of `H (H^H H)^-1`, with each user's power split
/// across its paths by Cauchy-Schwarz and water-filling across users.
pub fn zf_per_path(ch: &ChannelSet, p: f64) -> Result<ZfSolution> {
    check_power(p)?;
    let h = channel_matrix(ch);
    let w = zf_directions(&h)?;
    let sigma2 = ch.noise_power();
    let q: Vec<Vec<f64>> = (0..ch.num_users())
        .map(|k| {
            let off = path_offset(ch, k);
            (0..ch.num_paths(k)).map(|l| 1.0 / w.column(off + l).norm()).collect()
        })
        .collect();
    let q_norm2: Vec<f64> = q.iter().map(|qk| qk.iter().map(|x| x * x).sum()).collect();
    let inv: Vec<f64> = q_norm2.iter().map(|g| sigma2 / g).collect();
    let user_power = water_fill(&inv, p)?;

    let mut blocks = Vec::with_capacity(ch.num_users());
    let mut path_scaling = Vec::with_capacity(ch.num_users());
    for k in 0..ch.num_users() {
        let off = path_offset(ch, k);
        let scale = (user_power[k] / q_norm2[k]).sqrt();
        let mut vk = Vec::with_capacity(ch.num_paths(k));
        let mut bk = Vec::with_capacity(ch.num_paths(k));
        for l in 0..ch.num_paths(k) {
            // t_kl = sqrt(P_k) q_kl / |q_k| and v_kl = t_kl^2 / |w_kl|^2 = t_kl^2 q_kl^2
            let t = scale * q[k][l];
            let v = t * t * q[k][l] * q[k][l];
            bk.push(w.column(off + l) * Complex64::new(v.sqrt(), 0.0));
            vk.push(v);
        }
        blocks.push(bk);
        path_scaling.push(vk);
    }
    let snr: Vec<f64> = path_scaling
        .iter()
        .map(|vk| vk.iter().map(|v| v.sqrt()).sum::<f64>().powi(2) / sigma2)
        .collect();
    let per_user_rate = snr.iter().map(|g| (1.0 + g).log2()).collect();
    Ok(ZfSolution {
        beams: PathBeamformerSet::from_blocks(ch, blocks)?,
        user_power,
        path_scaling,
        snr,
        per_user_rate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RzfSolution {
    pub beams: PathBeamformerSet,
    /// Unit-norm per-path directions, `directions[k][l]`.
    pub directions: Vec<Vec<CVector>>,
    /// Complex amplitude `sqrt(p_kl) e^{j phi_kl}` per path.
    pub amplitudes: Vec<CVector>,
    /// Sum rate at the initial point and after every accepted SCA step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RzfSolution {
    pub fn sum_rate(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Fixed per-path directions plus the reduced amplitude model.
#[derive(Debug, Clone)]
pub struct RzfSetup {
    pub directions: Vec<Vec<CVector>>,
    pub model: InterferenceModel,
    pub budget: f64,
}

impl RzfSetup {
    /// Directions are the normalized columns of `H (H^H H + eps I)^-1` with
    /// `eps = L_tot sigma^2 / P`.
    pub fn new(ch: &ChannelSet, p: f64) -> Result<Self> {
        check_power(p)?;
        let h = channel_matrix(ch);
        let eps = ch.total_paths() as f64 * ch.noise_power() / p;
        let f = regularized_directions(&h, eps);
        let mt = ch.num_antennas();
        let mut directions = Vec::with_capacity(ch.num_users());
        let mut maps = Vec::with_capacity(ch.num_users());
        for k in 0..ch.num_users() {
            let off = path_offset(ch, k);
            let lk = ch.num_paths(k);
            let mut map = CMatrix::zeros(mt * lk, lk);
            let mut dirs = Vec::with_capacity(lk);
            for l in 0..lk {
                let col = f.column(off + l);
                let u = col / Complex64::new(col.norm(), 0.0);
                map.view_mut((l * mt, l), (mt, 1)).copy_from(&u);
                dirs.push(u);
            }
            directions.push(dirs);
            maps.push(map);
        }
        let model = InterferenceModel::dam(ch).compose(&maps)?;
        Ok(Self { directions, model, budget: p })
    }

    /// Equal power `P / L_tot` per path with phases making every term of the
    /// desired amplitude real and positive.
    pub fn coherent_init(&self) -> Vec<CVector> {
        let total: usize = self.model.dims().iter().sum();
        let amp = (self.budget / total as f64).sqrt();
        (0..self.model.num_users())
            .map(|k| {
                let mut coeff = vec![C64::new(0.0, 0.0); self.model.dims()[k]];
                for &(i, c) in &self.model.user(k).desired.terms {
                    coeff[i] += c;
                }
                CVector::from_iterator(
                    coeff.len(),
                    coeff.iter().map(|c| {
                        if c.norm() > 0.0 {
                            c.conj() / c.norm() * amp
                        } else {
                            C64::new(amp, 0.0)
                        }
                    }),
                )
            })
            .collect()
    }

    pub fn beams(&self, ch: &ChannelSet, amplitudes: &[CVector]) -> Result<PathBeamformerSet> {
        let blocks = self
            .directions
            .iter()
            .zip(amplitudes)
            .map(|(dirs, a)| dirs.iter().zip(a.iter()).map(|(u, &w)| u * w).collect())
            .collect();
        PathBeamformerSet::from_blocks(ch, blocks)
    }
}

/// Sum-rate SCA over the complex path amplitudes of [`RzfSetup`].
///
/// Each user's SINR slack `g_k` is bounded through
/// `interference + noise <= |desired|^2 / g_k`, whose right side is
/// jointly convex and is replaced by its tangent at the current point.
/// The tangent is taken at the true SINR there, which keeps the current
/// point feasible for the surrogate and the true sum rate non-decreasing.
#[derive(Debug, Clone)]
pub struct AmplitudeSca<'a> {
    pub model: &'a InterferenceModel,
    pub budget: f64,
    pub settings: SolverSettings,
}

/// Interleaved real view of `Re/Im(form . v) * scale`.
fn form_re_im(form: &LinearForm, offset: usize, scale: f64) -> (Affine, Affine) {
    let mut re = Vec::with_capacity(2 * form.terms.len());
    let mut im = Vec::with_capacity(2 * form.terms.len());
    for &(i, c) in &form.terms {
        re.push((offset + 2 * i, c.re * scale));
        re.push((offset + 2 * i + 1, -c.im * scale));
        im.push((offset + 2 * i, c.im * scale));
        im.push((offset + 2 * i + 1, c.re * scale));
    }
    (Affine::new(re, 0.0), Affine::new(im, 0.0))
}

impl ScaProblem for AmplitudeSca<'_> {
    type Point = Vec<CVector>;

    fn objective(&self, x: &Vec<CVector>) -> f64 {
        self.model.sum_rate(x).unwrap_or(f64::NEG_INFINITY)
    }

    fn is_feasible(&self, x: &Vec<CVector>) -> bool {
        x.len() == self.model.num_users()
            && x.iter().map(|v| v.norm_squared()).sum::<f64>() <= self.budget * (1.0 + 1e-9)
    }

    fn solve_surrogate(&self, at: &Vec<CVector>) -> Result<Vec<CVector>> {
        let m = self.model;
        let kk = m.num_users();
        let sigma = m.noise_power().sqrt();
        let s = (0..kk).map(|k| m.user(k).desired.coefficient_norm()).sum::<f64>() / kk as f64;
        if !(s > 0.0) {
            return Err(DamError::Solver("all desired amplitudes vanish".into()));
        }
        // v = w s / sigma
        let to_v = s / sigma;
        let mut prog = ConeProgram::new();
        let offsets: Vec<usize> = m.dims().iter().map(|&d| prog.add_vars(2 * d)).collect();
        let g = prog.add_vars(kk);
        let tau = prog.add_vars(kk);
        let nv = offsets.last().map(|&o| o + 2 * m.dims()[kk - 1]).unwrap_or(0);
        let budget_v = (self.budget * to_v * to_v).sqrt();
        prog.add_soc(Affine::constant(budget_v), (0..nv).map(Affine::var).collect());

        for k in 0..kk {
            let u = m.user(k);
            let z0 = u.desired.eval(&at[k]) / sigma;
            let interf0: f64 = u.interference.iter().map(|(o, f)| f.eval(&at[*o]).norm_sqr()).sum();
            let load0 = interf0 / m.noise_power() + 1.0;
            let gamma0 = z0.norm_sqr() / load0;
            if !(gamma0 > 0.0) {
                return Err(DamError::Solver(format!("user {k} has no desired signal at the current point")));
            }
            let c = 1.0 / load0.sqrt();
            let mut xs = Vec::with_capacity(2 * u.interference.len() + 1);
            for (o, f) in &u.interference {
                let (re, im) = form_re_im(f, offsets[*o], c / s);
                xs.push(re);
                xs.push(im);
            }
            xs.push(Affine::constant(c));
            // 2 Re(conj(z0) d.v) / gamma0 - |z0|^2 g / gamma0^2, scaled by c^2
            let rotated = LinearForm { terms: u.desired.terms.iter().map(|&(i, a)| (i, a * z0.conj())).collect() };
            let (re, _) = form_re_im(&rotated, offsets[k], 2.0 * c * c / (s * gamma0));
            // g is carried relative to gamma0
            let bound = re.plus(&Affine::new(vec![(g + k, -c * c * z0.norm_sqr() / gamma0)], 0.0));
            prog.add_squared_norm_le(xs, bound);
            prog.add(crate::conic::program::Cone::Nonneg, vec![Affine::var(g + k)]);
            prog.add_log_le(Affine::var(tau + k), Affine::new(vec![(g + k, gamma0)], 1.0));
            prog.add_linear_cost(tau + k, -1.0);
        }

        let sol = prog.solve(&self.settings)?;
        if !sol.status.is_optimal() {
            return Err(DamError::Solver(format!("amplitude surrogate ended {}", sol.status.as_str())));
        }
        let mut out: Vec<CVector> = (0..kk)
            .map(|k| {
                CVector::from_fn(m.dims()[k], |i, _| {
                    C64::new(sol.x[offsets[k] + 2 * i], sol.x[offsets[k] + 2 * i + 1]) / to_v
                })
            })
            .collect();
        let total: f64 = out.iter().map(|v| v.norm_squared()).sum();
        if total > self.budget {
            let f = Complex64::new((self.budget / total).sqrt(), 0.0);
            out.iter_mut().for_each(|v| *v *= f);
        }
        check_inexact_step(self, at, out, sol.reduced_accuracy)
    }
}

/// Per-path RZF from the coherent equal-power start.
pub fn rzf_per_path(ch: &ChannelSet, p: f64, settings: &SolverSettings) -> Result<RzfSolution> {
    let setup = RzfSetup::new(ch, p)?;
    let init = setup.coherent_init();
    rzf_per_path_from(ch, &setup, init, settings)
}

/// Per-path RZF from a caller-supplied amplitude start.
pub fn rzf_per_path_from(
    ch: &ChannelSet,
    setup: &RzfSetup,
    init: Vec<CVector>,
    settings: &SolverSettings,
) -> Result<RzfSolution> {
    let problem = AmplitudeSca { model: &setup.model, budget: setup.budget, settings: settings.clone() };
    let out = sca_drive(&problem, init, settings)?;
    Ok(RzfSolution {
        beams: setup.beams(ch, &out.point)?,
        directions: setup.directions.clone(),
        amplitudes: out.point,
        trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}
