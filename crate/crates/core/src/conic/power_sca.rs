//! Power-only sum-rate maximization for schemes with fixed beam directions.
//!
//! Every rate term has the form `w * log2((noise + a1.p) / (noise + a2.p))`
//! where `a1` collects all received power (desired plus interference) and
//! `a2` the interference alone. The surrogate keeps the concave `log(a1.p)`
//! part and replaces the subtracted `log(a2.p)` by its tangent.

use std::f64::consts::LN_2;

use super::program::{Affine, Cone, ConeProgram};
use super::sca::{check_inexact_step, ScaProblem};
use super::SolverSettings;
use crate::error::{DamError, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RateTerm {
    pub weight: f64,
    pub signal: Vec<(usize, f64)>,
    pub interference: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct PowerAllocation {
    pub terms: Vec<RateTerm>,
    pub num_vars: usize,
    pub budget: f64,
    pub noise_power: f64,
    pub settings: SolverSettings,
}

fn dot(coeffs: &[(usize, f64)], p: &[f64]) -> f64 {
    coeffs.iter().map(|&(i, a)| a * p[i]).sum()
}

impl PowerAllocation {
    pub fn term_rate(&self, term: &RateTerm, p: &[f64]) -> f64 {
        let s = self.noise_power;
        term.weight * ((s + dot(&term.signal, p)) / (s + dot(&term.interference, p))).log2()
    }

    pub fn equal_split(&self) -> Vec<f64> {
        vec![self.budget / self.num_vars as f64; self.num_vars]
    }
}

impl ScaProblem for PowerAllocation {
    type Point = Vec<f64>;

    fn objective(&self, p: &Vec<f64>) -> f64 {
        self.terms.iter().map(|t| self.term_rate(t, p)).sum()
    }

    fn is_feasible(&self, p: &Vec<f64>) -> bool {
        p.len() == self.num_vars
            && p.iter().all(|&v| v >= 0.0 && v.is_finite())
            && p.iter().sum::<f64>() <= self.budget * (1.0 + 1e-9)
    }

    fn solve_surrogate(&self, at: &Vec<f64>) -> Result<Vec<f64>> {
        let snr = self.budget / self.noise_power;
        let q0: Vec<f64> = at.iter().map(|p| p / self.budget).collect();
        let mut prog = ConeProgram::new();
        let q = prog.add_vars(self.num_vars);
        let tau = prog.add_vars(self.terms.len());
        prog.add(Cone::Nonneg, (0..self.num_vars).map(|i| Affine::var(q + i)).collect());
        prog.add_le(
            Affine::new((0..self.num_vars).map(|i| (q + i, 1.0)).collect(), 0.0),
            Affine::constant(1.0),
        );
        for (j, term) in self.terms.iter().enumerate() {
            let w = term.weight / LN_2;
            prog.add_linear_cost(tau + j, -w);
            let signal = Affine::new(term.signal.iter().map(|&(i, a)| (q + i, a * snr)).collect(), 1.0);
            prog.add_log_le(Affine::var(tau + j), signal);
            // tangent of ln(1 + c.q) at q0, constant part dropped
            let base = 1.0 + snr * dot(&term.interference, &q0);
            for &(i, a) in &term.interference {
                prog.add_linear_cost(q + i, w * a * snr / base);
            }
        }
        let sol = prog.solve(&self.settings)?;
        if !sol.status.is_optimal() {
            return Err(DamError::Solver(format!("power surrogate ended {}", sol.status.as_str())));
        }
        let mut p: Vec<f64> = (0..self.num_vars).map(|i| sol.x[q + i].max(0.0) * self.budget).collect();
        let total: f64 = p.iter().sum();
        if total > self.budget {
            let f = self.budget / total;
            p.iter_mut().for_each(|v| *v *= f);
        }
        check_inexact_step(self, at, p, sol.reduced_accuracy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{sca_drive, water_fill};

    #[test]
    fn parallel_channels_reach_water_filling() {
        // no interference: the surrogate is exact and the optimum is WF
        let gains = [2.0, 0.5, 1.0];
        let noise = 0.1;
        let terms = gains
            .iter()
            .enumerate()
            .map(|(i, &g)| RateTerm { weight: 1.0, signal: vec![(i, g)], interference: vec![] })
            .collect();
        let prob = PowerAllocation { terms, num_vars: 3, budget: 1.0, noise_power: noise, settings: SolverSettings::default() };
        let out = sca_drive(&prob, prob.equal_split(), &SolverSettings::default()).unwrap();
        let inv: Vec<f64> = gains.iter().map(|g| noise / g).collect();
        let wf = water_fill(&inv, 1.0).unwrap();
        let best = prob.objective(&wf);
        assert!((out.objective() - best).abs() < 1e-6 * best);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn interference_trace_monotone() {
        let terms = vec![
            RateTerm { weight: 1.0, signal: vec![(0, 1.0), (1, 0.4)], interference: vec![(1, 0.4)] },
            RateTerm { weight: 1.0, signal: vec![(1, 0.8), (0, 0.3)], interference: vec![(0, 0.3)] },
        ];
        let prob = PowerAllocation { terms, num_vars: 2, budget: 10.0, noise_power: 0.1, settings: SolverSettings::default() };
        let out = sca_drive(&prob, prob.equal_split(), &SolverSettings::default()).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.objective() >= prob.objective(&prob.equal_split()));
    }
}
