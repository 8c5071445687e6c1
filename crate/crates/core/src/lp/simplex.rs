//! Two-phase dense tableau simplex.
//!
//! The tableau only drives the pivoting. Once a final basis is known the
//! primal point and the row duals are recomputed from the original (scaled)
//! data with an LU factorization of the basis, which keeps residuals at
//! round-off level even after long pivot sequences.

use nalgebra::{DMatrix, DVector};

use super::{
    check_solution, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense, SolverOptions,
};

/// Solves `lp` with default [`SolverOptions`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

/// Solves `lp`. Optimal results are certified with
/// [`check_solution`](super::check_solution); a certificate that misses the
/// tolerances in `opts` is reported as [`LpError::Numerical`].
pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let std = StandardForm::build(lp);
    let mut tab = Tableau::new(&std);
    let mut iterations = 0;

    if tab.has_artificials() {
        tab.set_phase_one_costs();
        match tab.run(opts, &mut iterations)? {
            PhaseOutcome::Optimal => {}
            // phase one is bounded below by zero
            PhaseOutcome::Unbounded => {
                return Err(LpError::Numerical {
                    message: "phase one reported unbounded".into(),
                    report: None,
                })
            }
        }
        let infeasibility = -tab.obj[tab.rhs_col()];
        let b_scale = 1.0 + std.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if infeasibility > opts.feasibility_tol * b_scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
        }
        tab.drive_out_artificials(opts);
    }

    tab.set_phase_two_costs(&std.cost);
    if let PhaseOutcome::Unbounded = tab.run(opts, &mut iterations)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations));
    }

    let solution = std.recover(lp, &tab.basis, iterations)?;
    let report = check_solution(lp, &solution);
    if !report.passes(opts) {
        return Err(LpError::Numerical {
            message: "optimal basis failed certification".into(),
            report: Some(report),
        });
    }
    Ok(solution)
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lo + col
    Shift { col: usize, lo: f64 },
    /// x = hi - col
    Mirror { col: usize, hi: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
    Fixed(f64),
}

/// Equality form `A s = b, s >= 0` after substitution, slack insertion,
/// sign normalization (`b >= 0`) and row scaling.
struct StandardForm {
    map: Vec<VarMap>,
    /// Rows over all columns (structural, slack, artificial).
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Phase-two cost per column (zero on slacks and artificials).
    cost: Vec<f64>,
    is_artificial: Vec<bool>,
    /// Column that starts basic in each row.
    initial_basis: Vec<usize>,
    /// Factor each original constraint row was multiplied by, `None` for
    /// rows generated from variable bounds.
    row_factor: Vec<Option<f64>>,
    /// Objective was multiplied by this (sign for max, scale for conditioning).
    cost_factor: f64,
    num_original_rows: usize,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let sigma = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };

        let mut map = Vec::with_capacity(n);
        let mut num_struct = 0;
        // (structural column, upper bound on it) for finite boxes
        let mut box_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            let entry = if lo.is_finite() && hi.is_finite() && lo == hi {
                VarMap::Fixed(lo)
            } else if lo.is_finite() {
                let col = num_struct;
                num_struct += 1;
                if hi.is_finite() {
                    box_rows.push((col, hi - lo));
                }
                VarMap::Shift { col, lo }
            } else if hi.is_finite() {
                let col = num_struct;
                num_struct += 1;
                VarMap::Mirror { col, hi }
            } else {
                let pos = num_struct;
                num_struct += 2;
                VarMap::Split { pos, neg: pos + 1 }
            };
            map.push(entry);
        }

        // rows over structural columns
        struct Row {
            coeffs: Vec<f64>,
            relation: Relation,
            rhs: f64,
        }
        let mut rows: Vec<Row> = Vec::with_capacity(lp.num_constraints() + box_rows.len());
        for c in &lp.constraints {
            let mut coeffs = vec![0.0; num_struct];
            let mut rhs = c.rhs;
            for (j, &a) in c.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match map[j] {
                    VarMap::Shift { col, lo } => {
                        coeffs[col] += a;
                        rhs -= a * lo;
                    }
                    VarMap::Mirror { col, hi } => {
                        coeffs[col] -= a;
                        rhs -= a * hi;
                    }
                    VarMap::Split { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                    VarMap::Fixed(v) => rhs -= a * v,
                }
            }
            rows.push(Row {
                coeffs,
                relation: c.relation,
                rhs,
            });
        }
        for &(col, width) in &box_rows {
            let mut coeffs = vec![0.0; num_struct];
            coeffs[col] = 1.0;
            rows.push(Row {
                coeffs,
                relation: Relation::Le,
                rhs: width,
            });
        }

        let m = rows.len();
        let num_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        // decide signs and which rows need artificials
        let mut factors = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        for r in &rows {
            let scale = r.coeffs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            factors.push(sign / scale);
            let slack_usable = match r.relation {
                Relation::Le => sign > 0.0,
                Relation::Ge => sign < 0.0,
                Relation::Eq => false,
            };
            needs_art.push(!slack_usable);
        }
        let num_art = needs_art.iter().filter(|&&b| b).count();
        let total = num_struct + num_slack + num_art;

        let mut a = vec![vec![0.0; total]; m];
        let mut rhs = vec![0.0; m];
        let mut is_artificial = vec![false; total];
        let mut initial_basis = vec![0; m];
        let mut next_slack = num_struct;
        let mut next_art = num_struct + num_slack;
        for (i, r) in rows.iter().enumerate() {
            let f = factors[i];
            for (k, &v) in r.coeffs.iter().enumerate() {
                a[i][k] = v * f;
            }
            rhs[i] = r.rhs * f;
            let slack_col = match r.relation {
                Relation::Eq => None,
                Relation::Le | Relation::Ge => {
                    let col = next_slack;
                    next_slack += 1;
                    let s = if r.relation == Relation::Le { 1.0 } else { -1.0 };
                    // slack enters unscaled so that a usable slack has unit coefficient
                    a[i][col] = s * f.signum();
                    Some(col)
                }
            };
            if needs_art[i] {
                let col = next_art;
                next_art += 1;
                a[i][col] = 1.0;
                is_artificial[col] = true;
                initial_basis[i] = col;
            } else {
                initial_basis[i] = slack_col.expect("usable slack exists");
            }
        }

        let mut raw_cost = vec![0.0; total];
        for (j, entry) in map.iter().enumerate() {
            let c = sigma * lp.objective[j];
            match *entry {
                VarMap::Shift { col, .. } => raw_cost[col] = c,
                VarMap::Mirror { col, .. } => raw_cost[col] = -c,
                VarMap::Split { pos, neg } => {
                    raw_cost[pos] = c;
                    raw_cost[neg] = -c;
                }
                VarMap::Fixed(_) => {}
            }
        }
        let c_scale = raw_cost.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };
        let cost = raw_cost.iter().map(|c| c / c_scale).collect();

        let num_original_rows = lp.num_constraints();
        let row_factor = (0..m)
            .map(|i| (i < num_original_rows).then_some(factors[i]))
            .collect();

        Self {
            map,
            a,
            rhs,
            cost,
            is_artificial,
            initial_basis,
            row_factor,
            cost_factor: sigma / c_scale,
            num_original_rows,
        }
    }

    fn num_cols(&self) -> usize {
        self.is_artificial.len()
    }

    /// Rebuilds primal and dual values from the final basis.
    fn recover(
        &self,
        lp: &LinearProgram,
        basis: &[usize],
        iterations: usize,
    ) -> Result<LpSolution, LpError> {
        let m = self.rhs.len();
        let mut cols = vec![0.0; self.num_cols()];
        let mut y_scaled = vec![0.0; m];
        if m > 0 {
            let b = DMatrix::from_fn(m, m, |r, k| self.a[r][basis[k]]);
            let lu = b.clone().lu();
            let xb = lu
                .solve(&DVector::from_column_slice(&self.rhs))
                .ok_or_else(singular_basis)?;
            for (k, &col) in basis.iter().enumerate() {
                cols[col] = xb[k];
            }
            let cb = DVector::from_iterator(m, basis.iter().map(|&col| self.cost[col]));
            let y = b
                .transpose()
                .lu()
                .solve(&cb)
                .ok_or_else(singular_basis)?;
            y_scaled.copy_from_slice(y.as_slice());
        }

        let primal: Vec<f64> = self
            .map
            .iter()
            .map(|entry| match *entry {
                VarMap::Shift { col, lo } => lo + cols[col],
                VarMap::Mirror { col, hi } => hi - cols[col],
                VarMap::Split { pos, neg } => cols[pos] - cols[neg],
                VarMap::Fixed(v) => v,
            })
            .collect();

        // y_min = d(obj_min)/d(b_original) = factor * y_scaled / cost_scale;
        // the reported dual is -y_min (improvement convention)
        let c_scale = self.cost_factor.abs().recip();
        let duals: Vec<f64> = (0..self.num_original_rows)
            .map(|i| {
                let f = self.row_factor[i].expect("original row");
                -(f * y_scaled[i] * c_scale)
            })
            .collect();

        let sigma = self.cost_factor.signum();
        let reduced_costs = (0..lp.num_vars())
            .map(|j| {
                // lambda = d(obj)/d(b) in the caller's sense = -sigma * dual
                let col_dot: f64 = lp
                    .constraints
                    .iter()
                    .zip(&duals)
                    .map(|(r, d)| r.coeffs[j] * (-sigma * d))
                    .sum();
                lp.objective[j] - col_dot
            })
            .collect();

        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: lp.objective_value(&primal),
            primal,
            duals,
            reduced_costs,
            iterations,
        })
    }
}

fn singular_basis() -> LpError {
    LpError::Numerical {
        message: "final basis matrix is singular".into(),
        report: None,
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    is_artificial: Vec<bool>,
    /// Artificial rows found redundant after phase one.
    frozen_rows: Vec<bool>,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let t = std
            .a
            .iter()
            .zip(&std.rhs)
            .map(|(row, &b)| {
                let mut r = row.clone();
                r.push(b);
                r
            })
            .collect();
        Self {
            t,
            obj: vec![0.0; std.num_cols() + 1],
            basis: std.initial_basis.clone(),
            is_artificial: std.is_artificial.clone(),
            frozen_rows: vec![false; std.rhs.len()],
        }
    }

    fn rhs_col(&self) -> usize {
        self.is_artificial.len()
    }

    fn has_artificials(&self) -> bool {
        self.basis.iter().any(|&b| self.is_artificial[b])
    }

    fn price(&mut self, cost: &[f64]) {
        let rc = self.rhs_col();
        self.obj[..rc].copy_from_slice(cost);
        self.obj[rc] = 0.0;
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (o, v) in self.obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn set_phase_one_costs(&mut self) {
        let cost: Vec<f64> = self
            .is_artificial
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .collect();
        self.price(&cost);
    }

    fn set_phase_two_costs(&mut self, cost: &[f64]) {
        self.price(cost);
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.t[r][e];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        self.t[r][e] = 1.0;
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn run(&mut self, opts: &SolverOptions, iterations: &mut usize) -> Result<PhaseOutcome, LpError> {
        let rc = self.rhs_col();
        let mut bland = false;
        let mut degenerate_streak = 0;
        loop {
            if *iterations >= opts.max_iterations {
                return Err(LpError::IterationLimit(opts.max_iterations));
            }
            let entering = if bland {
                (0..rc).find(|&j| !self.is_artificial[j] && self.obj[j] < -opts.optimality_tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..rc {
                    let d = self.obj[j];
                    if self.is_artificial[j] || d >= -opts.optimality_tol {
                        continue;
                    }
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(e) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if self.frozen_rows[i] {
                    continue;
                }
                let a = row[e];
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = row[rc].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                a > self.t[li][e]
                            }
                        } else {
                            ratio < lr
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };

            if ratio <= 1e-12 {
                degenerate_streak += 1;
                if degenerate_streak >= opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, e);
            *iterations += 1;
            for row in self.t.iter_mut() {
                if row[rc] < 0.0 && row[rc] > -opts.feasibility_tol {
                    row[rc] = 0.0;
                }
            }
        }
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get frozen.
    fn drive_out_artificials(&mut self, opts: &SolverOptions) {
        let rc = self.rhs_col();
        for r in 0..self.t.len() {
            if !self.is_artificial[self.basis[r]] {
                continue;
            }
            self.t[r][rc] = 0.0;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..rc {
                if self.is_artificial[j] {
                    continue;
                }
                let a = self.t[r][j].abs();
                if a > opts.pivot_tol.max(1e-7) && best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => self.pivot(r, j),
                None => {
                    for j in 0..rc {
                        if !self.is_artificial[j] {
                            self.t[r][j] = 0.0;
                        }
                    }
                    self.frozen_rows[r] = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LinearProgram, Relation, Sense};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn one_variable_max() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0, "cap");
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.primal[0], 1.0, 1e-12);
        assert_close(sol.objective, 1.0, 1e-12);
        assert_close(sol.duals[0], 1.0, 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0, "lo");
        lp.add_constraint(vec![1.0], Relation::Le, 1.0, "hi");
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn two_variable_min_dual() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![-1.0, -1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0, "sum");
        let sol = solve_lp(&lp).unwrap();
        assert_close(sol.objective, -1.0, 1e-12);
        assert_close(sol.duals[0], 1.0, 1e-12);
        assert_close(sol.primal[0] + sol.primal[1], 1.0, 1e-12);
        let report = check_solution(&lp, &sol);
        assert!(report.gap <= 1e-10);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0, "diff");
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x + 2y, x free, y <= 3, x + y >= -1, x - y <= 4
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 3.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, -1.0, "a");
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 4.0, "b");
        let sol = solve_lp(&lp).unwrap();
        // vertex at x + y = -1, x - y = 4 -> x = 1.5, y = -2.5
        assert_close(sol.primal[0], 1.5, 1e-10);
        assert_close(sol.primal[1], -2.5, 1e-10);
        assert_close(sol.objective, -3.5, 1e-10);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.set_bounds(0, 0.25, 0.25);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0, "sum");
        let sol = solve_lp(&lp).unwrap();
        assert_close(sol.primal[0], 0.25, 0.0);
        assert_close(sol.primal[1], 0.75, 1e-12);
        assert_close(sol.duals[0], -1.0, 1e-12);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0, "e1");
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 4.0, "e2");
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 1.5, "cap");
        let sol = solve_lp(&lp).unwrap();
        assert_close(sol.objective, 2.0, 1e-12);
    }

    #[test]
    fn no_constraints() {
        let lp = LinearProgram::new(Sense::Minimize, vec![1.0, 0.0]);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.primal, vec![0.0, 0.0]);
        let lp = LinearProgram::new(Sense::Minimize, vec![-1.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule without anti-cycling.
        let mut lp = LinearProgram::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0, "r1");
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0, "r2");
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0, "r3");
        let sol = solve_lp(&lp).unwrap();
        assert_close(sol.objective, -0.05, 1e-10);
    }
}
