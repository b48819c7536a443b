//! Small builder for conic programs handed to clarabel.
//!
//! Constraints are written as "this affine expression lies in that cone",
//! which maps onto clarabel's `s = b - A x` form with `A = -a`, `b = c`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{SolveStatus, SolverSettings};
use crate::error::{DamError, Result};

/// `constant + sum coef * x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn plus(mut self, other: &Affine) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero,
    Nonneg,
    Soc,
    Exp,
}

#[derive(Debug, Clone)]
pub struct ConeProgram {
    num_vars: usize,
    linear: Vec<f64>,
    rows: Vec<Affine>,
    cones: Vec<SupportedConeT<f64>>,
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: u32,
    /// Solved only to the solver's relaxed tolerances.
    pub reduced_accuracy: bool,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self { num_vars: 0, linear: Vec::new(), rows: Vec::new(), cones: Vec::new() }
    }

    /// Adds `n` fresh variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        self.linear.resize(self.num_vars, 0.0);
        first
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Adds `c * x[v]` to the minimized objective.
    pub fn add_linear_cost(&mut self, v: usize, c: f64) {
        self.linear[v] += c;
    }

    pub fn add(&mut self, cone: Cone, exprs: Vec<Affine>) {
        let n = exprs.len();
        match cone {
            Cone::Exp => assert_eq!(n, 3, "exponential cone takes three rows"),
            Cone::Soc => assert!(n >= 1),
            _ => {}
        }
        let merged = match (cone, self.cones.last_mut()) {
            (Cone::Zero, Some(SupportedConeT::ZeroConeT(d))) => {
                *d += n;
                true
            }
            (Cone::Nonneg, Some(SupportedConeT::NonnegativeConeT(d))) => {
                *d += n;
                true
            }
            _ => false,
        };
        if !merged {
            self.cones.push(match cone {
                Cone::Zero => SupportedConeT::ZeroConeT(n),
                Cone::Nonneg => SupportedConeT::NonnegativeConeT(n),
                Cone::Soc => SupportedConeT::SecondOrderConeT(n),
                Cone::Exp => SupportedConeT::ExponentialConeT(),
            });
        }
        self.rows.extend(exprs);
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: Affine, rhs: Affine) {
        self.add(Cone::Nonneg, vec![rhs.plus(&lhs.scaled(-1.0))]);
    }

    /// `norm(xs) <= t`.
    pub fn add_soc(&mut self, t: Affine, xs: Vec<Affine>) {
        let mut rows = Vec::with_capacity(xs.len() + 1);
        rows.push(t);
        rows.extend(xs);
        self.add(Cone::Soc, rows);
    }

    /// `norm(xs)^2 <= bound` with `bound` affine, as a second-order cone
    /// `norm(2 xs, bound - 1) <= bound + 1`.
    pub fn add_squared_norm_le(&mut self, xs: Vec<Affine>, bound: Affine) {
        let mut rows = Vec::with_capacity(xs.len() + 2);
        rows.push(bound.clone().plus(&Affine::constant(1.0)));
        rows.extend(xs.into_iter().map(|x| x.scaled(2.0)));
        rows.push(bound.plus(&Affine::constant(-1.0)));
        self.add(Cone::Soc, rows);
    }

    /// `t <= ln(w)`, i.e. `(t, 1, w)` in the exponential cone.
    pub fn add_log_le(&mut self, t: Affine, w: Affine) {
        self.add(Cone::Exp, vec![t, Affine::constant(1.0), w]);
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<ConeSolution> {
        let n = self.num_vars;
        let m = self.rows.len();
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(m);
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in &row.terms {
                if c != 0.0 {
                    ri.push(r);
                    ci.push(v);
                    vals.push(-c);
                }
            }
            b.push(row.constant);
        }
        let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
        let p = CscMatrix::zeros((n, n));

        let cfg = DefaultSettings {
            verbose: false,
            tol_feas: settings.feasibility_tolerance,
            tol_gap_abs: settings.duality_gap_tolerance,
            tol_gap_rel: settings.duality_gap_tolerance,
            max_iter: settings.max_solver_iterations,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &self.linear, &a, &b, &self.cones, cfg)
            .map_err(|e| DamError::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
            _ => SolveStatus::NumericalFailure,
        };
        let reduced_accuracy = matches!(sol.status, SolverStatus::AlmostSolved);
        Ok(ConeSolution { status, x: sol.x.clone(), iterations: sol.iterations, reduced_accuracy })
    }
}

impl Default for ConeProgram {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_norm_on_a_line() {
        // min |(x, y)| s.t. x + y = 2
        let mut prog = ConeProgram::new();
        let x = prog.add_vars(2);
        let t = prog.add_vars(1);
        prog.add_linear_cost(t, 1.0);
        prog.add_soc(Affine::var(t), vec![Affine::var(x), Affine::var(x + 1)]);
        prog.add(Cone::Zero, vec![Affine::new(vec![(x, 1.0), (x + 1, 1.0)], -2.0)]);
        let sol = prog.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7 && (sol.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn log_and_squared_norm_cones() {
        // max t s.t. t <= ln(w), w^2 <= 9  ->  t = ln 3
        let mut prog = ConeProgram::new();
        let t = prog.add_vars(1);
        let w = prog.add_vars(1);
        prog.add_linear_cost(t, -1.0);
        prog.add_log_le(Affine::var(t), Affine::var(w));
        prog.add_squared_norm_le(vec![Affine::var(w)], Affine::constant(9.0));
        let sol = prog.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[t] - 3f64.ln()).abs() < 1e-6, "{}", sol.x[t]);
    }

    #[test]
    fn infeasible_reported() {
        let mut prog = ConeProgram::new();
        let x = prog.add_vars(1);
        prog.add_le(Affine::var(x), Affine::constant(-1.0));
        prog.add(Cone::Nonneg, vec![Affine::var(x)]);
        let sol = prog.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}
