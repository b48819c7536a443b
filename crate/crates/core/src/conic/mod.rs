//! Convex optimization kernel: SINR-constrained power minimization,
//! water-filling and a monotone successive-convex-approximation driver.

mod model;
pub(crate) mod power_sca;
pub(crate) mod program;
pub(crate) mod sca;
mod socp;
mod waterfill;

pub use model::{InterferenceModel, LinearForm, UserTerms};
pub use sca::{sca_drive, ScaOutcome, ScaProblem};
pub use socp::{solve_power_min, solve_power_min_socp, PowerMinSolution, SocpInstance};
pub use waterfill::{water_fill, water_level};

use crate::error::{DamError, Result};

/// Tolerances shared by every conic solve and iterative loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub feasibility_tolerance: f64,
    pub duality_gap_tolerance: f64,
    /// Relative stopping width of the rate-profile bisection.
    pub bisection_epsilon: f64,
    /// SCA stops once the relative objective increase falls below this.
    pub sca_relative_stop: f64,
    /// SCA iteration cap.
    pub max_iterations: usize,
    /// Interior-point iteration cap per conic solve.
    pub max_solver_iterations: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tolerance: 1e-8,
            duality_gap_tolerance: 1e-8,
            bisection_epsilon: 1e-3,
            sca_relative_stop: 1e-4,
            max_iterations: 50,
            max_solver_iterations: 200,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DamError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.feasibility_tolerance, "feasibility_tolerance")?;
        pos(self.duality_gap_tolerance, "duality_gap_tolerance")?;
        pos(self.bisection_epsilon, "bisection_epsilon")?;
        pos(self.sca_relative_stop, "sca_relative_stop")?;
        if self.max_iterations == 0 || self.max_solver_iterations == 0 {
            return Err(DamError::InvalidConfig("iteration caps must be positive".into()));
        }
        Ok(())
    }

    /// Relative objective decrease an SCA step may show before it counts as
    /// a broken surrogate rather than solver noise.
    pub(crate) fn monotone_slack(&self) -> f64 {
        (1e3 * self.duality_gap_tolerance).max(1e-9)
    }
}

/// Outcome of a conic solve. Infeasibility is a normal result, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings { bisection_epsilon: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverSettings { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
