//! Transmit-power minimization under per-user SINR targets.
//!
//! Because a common phase rotation of a user's variables leaves every SINR
//! unchanged, the desired amplitude can be made real, and the SINR target
//! turns into the cone constraint
//! `sqrt(gamma) * |(interference amplitudes, sigma)| <= Re(desired)`.

use super::model::{InterferenceModel, LinearForm};
use super::program::{Affine, Cone, ConeProgram};
use super::{SolveStatus, SolverSettings};
use crate::channel::ChannelSet;
use crate::dam::PathBeamformerSet;
use crate::error::{DamError, Result};
use crate::{CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SocpInstance {
    pub model: InterferenceModel,
    pub targets: Vec<f64>,
}

impl SocpInstance {
    pub fn new(model: InterferenceModel, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != model.num_users() {
            return Err(DamError::DimensionMismatch(format!(
                "{} targets for {} users",
                targets.len(),
                model.num_users()
            )));
        }
        if let Some(t) = targets.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(DamError::InvalidConfig(format!("SINR target must be finite and nonnegative, got {t}")));
        }
        Ok(Self { model, targets })
    }

    /// Per-path DAM beams.
    pub fn dam(ch: &ChannelSet, targets: Vec<f64>) -> Result<Self> {
        Self::new(InterferenceModel::dam(ch), targets)
    }

    /// One beam per user toward its strongest path.
    pub fn strongest_path(ch: &ChannelSet, targets: Vec<f64>) -> Result<Self> {
        Self::new(InterferenceModel::strongest_path(ch), targets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMinSolution {
    /// Per-user variable vectors; zero for users with a zero target.
    pub beams: Vec<CVector>,
    pub total_power: f64,
    pub status: SolveStatus,
    pub solver_iterations: u32,
}

impl PowerMinSolution {
    /// Wraps the solution as DAM path beams; only meaningful for
    /// instances built with [`SocpInstance::dam`].
    pub fn path_beams(&self, ch: &ChannelSet) -> Result<PathBeamformerSet> {
        PathBeamformerSet::new(ch, self.beams.clone())
    }
}

/// Real-valued view of `Re/Im(form . y) * scale` over interleaved variables.
fn re_im(form: &LinearForm, offset: usize, scale: f64) -> (Affine, Affine) {
    let mut re = Vec::with_capacity(2 * form.terms.len());
    let mut im = Vec::with_capacity(2 * form.terms.len());
    for &(i, c) in &form.terms {
        let (ur, ui) = (offset + 2 * i, offset + 2 * i + 1);
        re.push((ur, c.re * scale));
        re.push((ui, -c.im * scale));
        im.push((ur, c.im * scale));
        im.push((ui, c.re * scale));
    }
    (Affine::new(re, 0.0), Affine::new(im, 0.0))
}

pub fn solve_power_min_socp(inst: &SocpInstance, settings: &SolverSettings) -> Result<PowerMinSolution> {
    solve_power_min(&inst.model, &inst.targets, settings)
}

pub fn solve_power_min(
    model: &InterferenceModel,
    targets: &[f64],
    settings: &SolverSettings,
) -> Result<PowerMinSolution> {
    settings.validate()?;
    if targets.len() != model.num_users() {
        return Err(DamError::DimensionMismatch("one target per user".into()));
    }
    let kk = model.num_users();
    let active: Vec<bool> = targets.iter().map(|&t| t > 0.0).collect();
    let zero_beams: Vec<CVector> = model.dims().iter().map(|&d| CVector::zeros(d)).collect();
    if !active.iter().any(|&a| a) {
        return Ok(PowerMinSolution {
            beams: zero_beams,
            total_power: 0.0,
            status: SolveStatus::Optimal,
            solver_iterations: 0,
        });
    }

    // Work in y = (s / sigma) x so desired coefficients and the noise entry
    // are both order one.
    let norms: Vec<f64> = (0..kk).filter(|&k| active[k]).map(|k| model.user(k).desired.coefficient_norm()).collect();
    let s = norms.iter().sum::<f64>() / norms.len() as f64;
    if !(s > 0.0) {
        return Ok(PowerMinSolution {
            beams: zero_beams,
            total_power: f64::INFINITY,
            status: SolveStatus::Infeasible,
            solver_iterations: 0,
        });
    }
    let sigma = model.noise_power().sqrt();

    let mut prog = ConeProgram::new();
    let mut offsets = vec![usize::MAX; kk];
    for k in (0..kk).filter(|&k| active[k]) {
        offsets[k] = prog.add_vars(2 * model.dims()[k]);
    }
    // minimize t >= |y|
    let nv = prog.num_vars();
    let t = prog.add_vars(1);
    prog.add_linear_cost(t, 1.0);
    prog.add_soc(Affine::var(t), (0..nv).map(Affine::var).collect());
    for k in (0..kk).filter(|&k| active[k]) {
        let u = model.user(k);
        let g = targets[k].sqrt();
        let (d_re, d_im) = re_im(&u.desired, offsets[k], 1.0 / (s * g));
        prog.add(Cone::Zero, vec![d_im]);
        let mut xs = Vec::with_capacity(2 * u.interference.len() + 1);
        for (o, f) in u.interference.iter().filter(|(o, _)| active[*o]) {
            let (re, im) = re_im(f, offsets[*o], 1.0 / s);
            xs.push(re);
            xs.push(im);
        }
        xs.push(Affine::constant(1.0));
        prog.add_soc(d_re, xs);
    }

    let sol = prog.solve(settings)?;
    let scale = sigma / s;
    let beams: Vec<CVector> = (0..kk)
        .map(|k| {
            if !active[k] || !sol.status.is_optimal() {
                return CVector::zeros(model.dims()[k]);
            }
            let o = offsets[k];
            CVector::from_fn(model.dims()[k], |i, _| C64::new(sol.x[o + 2 * i], sol.x[o + 2 * i + 1]) * scale)
        })
        .collect();
    let total_power = if sol.status.is_optimal() {
        beams.iter().map(|b| b.norm_squared()).sum()
    } else {
        f64::INFINITY
    };
    Ok(PowerMinSolution { beams, total_power, status: sol.status, solver_iterations: sol.iterations })
}
