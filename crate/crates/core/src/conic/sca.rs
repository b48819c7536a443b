//! Generic successive convex approximation loop.

use super::SolverSettings;
use crate::error::{DamError, Result};

/// A non-convex maximization handled by repeatedly solving a convex
/// surrogate that is tight at the current point.
pub trait ScaProblem {
    type Point: Clone;

    /// True objective, larger is better.
    fn objective(&self, point: &Self::Point) -> f64;

    /// Feasibility for the original problem.
    fn is_feasible(&self, point: &Self::Point) -> bool;

    /// Maximizer of the surrogate built at `at`.
    fn solve_surrogate(&self, at: &Self::Point) -> Result<Self::Point>;
}

/// Rejects a surrogate step that lost objective when the conic solve only
/// reached relaxed tolerances, so the loop stops instead of flagging a
/// broken surrogate.
pub(crate) fn check_inexact_step<S: ScaProblem>(
    problem: &S,
    at: &S::Point,
    next: S::Point,
    reduced_accuracy: bool,
) -> Result<S::Point> {
    if reduced_accuracy && problem.objective(&next) < problem.objective(at) {
        return Err(DamError::Solver("surrogate solved to reduced accuracy only".into()));
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome<P> {
    pub point: P,
    /// True objective at the initial point and after every accepted step.
    pub trace: Vec<f64>,
    /// Number of accepted (improving) steps.
    pub iterations: usize,
    /// False when stopped by the iteration cap or a failed surrogate solve.
    pub converged: bool,
}

impl<P> ScaOutcome<P> {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds at least the initial value")
    }
}

/// Runs SCA from `init` until the relative objective increase drops below
/// `settings.sca_relative_stop` or `settings.max_iterations` steps are taken.
///
/// A step whose objective falls by more than solver noise means the surrogate
/// was not a valid lower bound, and is reported as a contract violation. A
/// surrogate solve that fails outright ends the loop at the last good point.
pub fn sca_drive<S: ScaProblem>(
    problem: &S,
    init: S::Point,
    settings: &SolverSettings,
) -> Result<ScaOutcome<S::Point>> {
    settings.validate()?;
    if !problem.is_feasible(&init) {
        return Err(DamError::InvalidConfig("SCA initial point is infeasible".into()));
    }
    let slack = settings.monotone_slack();
    let mut point = init;
    let mut value = problem.objective(&point);
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        let next = match problem.solve_surrogate(&point) {
            Ok(p) => p,
            Err(DamError::Solver(msg)) => {
                log::warn!("SCA surrogate failed after {iterations} steps: {msg}");
                break;
            }
            Err(e) => return Err(e),
        };
        if !problem.is_feasible(&next) {
            return Err(DamError::ContractViolation("SCA surrogate returned an infeasible point".into()));
        }
        let next_value = problem.objective(&next);
        let scale = value.abs().max(1e-12);
        if next_value < value - slack * scale {
            return Err(DamError::ContractViolation(format!(
                "SCA objective decreased from {value} to {next_value}"
            )));
        }
        if next_value <= value {
            converged = true;
            break;
        }
        let gain = (next_value - value) / scale;
        point = next;
        value = next_value;
        trace.push(value);
        iterations += 1;
        if gain < settings.sca_relative_stop {
            converged = true;
            break;
        }
    }
    Ok(ScaOutcome { point, trace, iterations, converged })
}
