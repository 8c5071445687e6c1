use serde::{Deserialize, Serialize};

use super::{dot, LinearProgram, LpSolution, Relation, Sense, SolverOptions};

/// Optimality certificate residuals of a claimed solution.
///
/// All residuals are scaled: primal violations by `1 + |rhs|`, dual
/// violations by `1 + max|c|`, complementarity products by `1 + |objective|`,
/// and the gap by `max(1, |primal objective|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl ResidualReport {
    fn unusable() -> Self {
        Self {
            primal: f64::INFINITY,
            dual: f64::INFINITY,
            complementarity: f64::INFINITY,
            gap: f64::INFINITY,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }

    pub fn passes(&self, opts: &SolverOptions) -> bool {
        self.max_residual() <= opts.feasibility_tol && self.gap <= opts.gap_tol
    }
}

/// Recomputes primal feasibility, dual feasibility, complementary slackness
/// and the duality gap of `sol` against `lp` from scratch.
pub fn check_solution(lp: &LinearProgram, sol: &LpSolution) -> ResidualReport {
    let n = lp.num_vars();
    let m = lp.num_constraints();
    if sol.primal.len() != n || sol.duals.len() != m {
        return ResidualReport::unusable();
    }
    let x = &sol.primal;
    // everything below is in minimization form with y = d(obj_min)/d(b)
    let sigma = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let y: Vec<f64> = sol.duals.iter().map(|d| -d).collect();
    let c_scale = 1.0 + lp.objective.iter().fold(0.0_f64, |a, c| a.max(c.abs()));

    let mut primal = 0.0_f64;
    let mut dual = 0.0_f64;
    let mut slack_products = 0.0_f64;

    for (row, &yi) in lp.constraints.iter().zip(&y) {
        let activity = dot(&row.coeffs, x);
        let scale = 1.0 + row.rhs.abs();
        let (viol, slack, sign_viol) = match row.relation {
            Relation::Le => ((activity - row.rhs).max(0.0), row.rhs - activity, yi.max(0.0)),
            Relation::Ge => ((row.rhs - activity).max(0.0), activity - row.rhs, (-yi).max(0.0)),
            Relation::Eq => ((activity - row.rhs).abs(), 0.0, 0.0),
        };
        primal = primal.max(viol / scale);
        dual = dual.max(sign_viol / c_scale);
        slack_products = slack_products.max((yi * slack.max(0.0)).abs());
    }

    let mut dual_obj: f64 = lp.constraints.iter().zip(&y).map(|(r, yi)| r.rhs * yi).sum();
    for j in 0..n {
        let (lo, hi, xj) = (lp.lower[j], lp.upper[j], x[j]);
        if lo.is_finite() {
            primal = primal.max((lo - xj).max(0.0) / (1.0 + lo.abs()));
        }
        if hi.is_finite() {
            primal = primal.max((xj - hi).max(0.0) / (1.0 + hi.abs()));
        }
        let column_dot: f64 = lp
            .constraints
            .iter()
            .zip(&y)
            .map(|(r, yi)| r.coeffs[j] * yi)
            .sum();
        let d = sigma * lp.objective[j] - column_dot;
        let (zl, zu) = (d.max(0.0), (-d).max(0.0));
        if lo.is_finite() {
            dual_obj += lo * zl;
            slack_products = slack_products.max(zl * (xj - lo).max(0.0));
        } else {
            dual = dual.max(zl / c_scale);
        }
        if hi.is_finite() {
            dual_obj -= hi * zu;
            slack_products = slack_products.max(zu * (hi - xj).max(0.0));
        } else {
            dual = dual.max(zu / c_scale);
        }
    }

    let primal_obj = sigma * lp.objective_value(x);
    ResidualReport {
        primal,
        dual,
        complementarity: slack_products / (1.0 + primal_obj.abs()),
        gap: (primal_obj - dual_obj).abs() / primal_obj.abs().max(1.0),
        primal_objective: sigma * primal_obj,
        dual_objective: sigma * dual_obj,
    }
}
