//! Dense linear programming with certified primal/dual solutions.
//!
//! Problems are stated in the natural form
//!
//! ```text
//! min | max  c'x
//! s.t.       a_i'x  {<=, =, >=}  b_i
//!            lo_j <= x_j <= hi_j        (either side may be infinite)
//! ```
//!
//! and solved by a two-phase tableau simplex (see [`solve_lp`]). Every
//! optimal answer is re-checked with [`check_solution`] before it is handed
//! back, so callers never see an `Optimal` status whose residuals exceed the
//! configured tolerances.
//!
//! Dual values follow one convention regardless of the objective sense: the
//! dual of row `i` is the marginal *improvement* of the objective per unit
//! increase of `b_i`. A binding `<=` row therefore has a nonnegative dual in
//! both minimization and maximization problems, a binding `>=` row a
//! nonpositive one, and equality rows are unrestricted.

mod check;
mod format;
mod simplex;

pub use check::{check_solution, ResidualReport};
pub use format::write_lp_format;
pub use simplex::{solve_lp, solve_lp_with};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

/// A linear program with dense constraint rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
}

impl LinearProgram {
    /// Creates a program over `objective.len()` variables, all bounded below by zero.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            var_names: (0..n).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Appends a constraint and returns its row index.
    pub fn add_constraint(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
        name: impl Into<String>,
    ) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            name: name.into(),
        });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    pub fn set_var_name(&mut self, var: usize, name: impl Into<String>) {
        self.var_names[var] = name.into();
    }

    /// Objective value of `x` in the program's own sense.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Checks dimensions and finiteness of all coefficients.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(LpError::Shape(format!(
                "bounds/name vectors must have length {n}"
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient {j}")));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!(
                    "bounds of variable {j}: [{lo}, {hi}]"
                )));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Shape(format!(
                    "constraint {i} ({}) has {} coefficients, expected {n}",
                    row.name,
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite(format!("constraint {i} ({})", row.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. `primal`, `duals` and `reduced_costs` are empty
/// unless the status is [`LpStatus::Optimal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// One entry per constraint, see the module docs for the sign convention.
    pub duals: Vec<f64>,
    /// `c_j - a_j' * lambda` where `lambda` is the objective sensitivity to each rhs.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            primal: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Primal feasibility tolerance, also the certification bound for residuals.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Relative duality gap allowed at certification.
    pub gap_tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            gap_tol: 1e-7,
            bland_after: 25,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("numerical failure: {message} ({report:?})")]
    Numerical {
        message: String,
        report: Option<ResidualReport>,
    },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_ragged_rows() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0, "short");
        assert!(matches!(lp.validate(), Err(LpError::Shape(_))));
    }

    #[test]
    fn validate_rejects_nan() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, f64::NAN]);
        assert!(matches!(lp.validate(), Err(LpError::NonFinite(_))));
        lp.objective[1] = 0.0;
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, f64::INFINITY, "inf");
        assert!(matches!(lp.validate(), Err(LpError::NonFinite(_))));
    }
}
