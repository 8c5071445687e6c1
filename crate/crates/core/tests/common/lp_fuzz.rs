//! Random linear programs with known status, and a vertex-enumeration oracle
//! for tiny ones.

use aan_offload::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{certified, rng};

pub struct Case {
    pub lp: LinearProgram,
    /// Status any correct solver must report.
    pub expected: LpStatus,
    /// A point known to satisfy every constraint, for feasible cases.
    pub witness: Option<Vec<f64>>,
}

fn coeff(r: &mut ChaCha8Rng) -> f64 {
    if r.gen_bool(0.3) {
        0.0
    } else {
        r.gen_range(-5.0..5.0)
    }
}

/// Feasible LP with every variable boxed, hence an optimum exists.
pub fn feasible_case(seed: u64, n: usize, m: usize) -> Case {
    let mut r = rng(seed);
    let sense = if r.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LinearProgram::new(sense, (0..n).map(|_| coeff(&mut r)).collect());
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(-5.0..0.0) };
        let hi = if r.gen_bool(0.1) { lo } else { lo + r.gen_range(0.5..5.0) };
        lp.set_bounds(j, lo, hi);
        x0.push(if r.gen_bool(0.3) { lo } else { r.gen_range(lo..=hi) });
    }
    for i in 0..m {
        let scale = 10f64.powi(r.gen_range(-3..=3));
        let a: Vec<f64> = (0..n).map(|_| coeff(&mut r) * scale).collect();
        let ax: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
        // a third of the rows are tight at the witness, to exercise degeneracy
        let slack = if r.gen_bool(0.33) { 0.0 } else { r.gen_range(0.0..2.0) * scale };
        let (rel, rhs) = match r.gen_range(0..3) {
            0 => (Relation::Le, ax + slack),
            1 => (Relation::Ge, ax - slack),
            _ => (Relation::Eq, ax),
        };
        lp.add_constraint(a, rel, rhs, format!("r{i}"));
    }
    Case {
        lp,
        expected: LpStatus::Optimal,
        witness: Some(x0),
    }
}

/// Feasible case plus a pair of rows `a x <= beta` and `a x >= beta + gap`.
pub fn infeasible_case(seed: u64, n: usize, m: usize) -> Case {
    let mut case = feasible_case(seed, n, m);
    let mut r = rng(seed.wrapping_add(0x1f));
    let mut a: Vec<f64> = (0..n).map(|_| coeff(&mut r)).collect();
    a[r.gen_range(0..n)] = r.gen_range(1.0..5.0);
    let beta = r.gen_range(-3.0..3.0);
    case.lp.add_constraint(a.clone(), Relation::Le, beta, "cut_le");
    case.lp.add_constraint(a, Relation::Ge, beta + r.gen_range(0.1..2.0), "cut_ge");
    case.expected = LpStatus::Infeasible;
    case.witness = None;
    case
}

/// A free variable with a nonzero objective and no row touching it.
pub fn unbounded_case(seed: u64, n: usize, m: usize) -> Case {
    let mut case = feasible_case(seed, n, m);
    let lp = &mut case.lp;
    lp.objective.push(match lp.sense {
        Sense::Minimize => -1.0,
        Sense::Maximize => 1.0,
    });
    lp.lower.push(f64::NEG_INFINITY);
    lp.upper.push(f64::INFINITY);
    lp.var_names.push("ray".into());
    for c in lp.constraints.iter_mut() {
        c.coeffs.push(0.0);
    }
    case.expected = LpStatus::Unbounded;
    case.witness = None;
    case
}

pub struct FuzzOutcome {
    pub cases: usize,
    pub false_statuses: Vec<String>,
    pub uncertified: Vec<String>,
    pub oracle_mismatches: Vec<String>,
}

/// Best objective over all vertices of a tiny boxed LP.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        lp.constraints.iter().all(|c| {
            let ax: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let t = tol * (1.0 + c.rhs.abs());
            match c.relation {
                Relation::Le => ax <= c.rhs + t,
                Relation::Ge => ax >= c.rhs - t,
                Relation::Eq => (ax - c.rhs).abs() <= t,
            }
        }) && x
            .iter()
            .enumerate()
            .all(|(j, &v)| v >= lp.lower[j] - tol && v <= lp.upper[j] + tol)
    };
    let mut best: Option<f64> = None;
    let total = planes.len();
    let mut pick = vec![0usize; n];
    fn combos(start: usize, depth: usize, total: usize, pick: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
        if depth == pick.len() {
            out(pick);
            return;
        }
        for k in start..total {
            pick[depth] = k;
            combos(k + 1, depth + 1, total, pick, out);
        }
    }
    combos(0, 0, total, &mut pick, &mut |sel: &[usize]| {
        // equalities need not be among the chosen planes: dependent or empty
        // rows never are, and the feasibility check enforces them anyway
        let a = DMatrix::from_fn(n, n, |r, c| planes[sel[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[sel[r]].1);
        let Some(x) = a.lu().solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().all(|v| v.is_finite()) && feasible(&x) {
            let v = lp.objective_value(&x);
            let better = match (best, lp.sense) {
                (None, _) => true,
                (Some(b), Sense::Minimize) => v < b,
                (Some(b), Sense::Maximize) => v > b,
            };
            if better {
                best = Some(v);
            }
        }
    });
    best
}

/// Solves `count` random cases (mostly feasible, some infeasible and
/// unbounded) and tallies every discrepancy.
pub fn run_fuzz(count: usize, base_seed: u64) -> FuzzOutcome {
    let mut out = FuzzOutcome {
        cases: 0,
        false_statuses: Vec::new(),
        uncertified: Vec::new(),
        oracle_mismatches: Vec::new(),
    };
    for k in 0..count as u64 {
        let seed = base_seed + k;
        let mut r = rng(seed.wrapping_mul(7919));
        let tiny = k % 4 == 0;
        let (n, m) = if tiny {
            (r.gen_range(1..=3), r.gen_range(1..=3))
        } else {
            (r.gen_range(1..=10), r.gen_range(1..=10))
        };
        let case = match k % 10 {
            7 => infeasible_case(seed, n, m),
            9 => unbounded_case(seed, n, m),
            _ => feasible_case(seed, n, m),
        };
        out.cases += 1;
        let sol = match solve_lp(&case.lp) {
            Ok(s) => s,
            Err(e) => {
                out.false_statuses.push(format!("seed {seed}: error {e}"));
                continue;
            }
        };
        if sol.status != case.expected {
            out.false_statuses
                .push(format!("seed {seed}: got {:?}, expected {:?}", sol.status, case.expected));
            continue;
        }
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if !certified(&case.lp, &sol) {
            out.uncertified.push(format!("seed {seed}"));
        }
        if let Some(w) = &case.witness {
            let wv = case.lp.objective_value(w);
            let slack = 1e-7 * (1.0 + wv.abs());
            let ok = match case.lp.sense {
                Sense::Minimize => sol.objective <= wv + slack,
                Sense::Maximize => sol.objective >= wv - slack,
            };
            if !ok {
                out.oracle_mismatches
                    .push(format!("seed {seed}: optimum {} worse than witness {wv}", sol.objective));
            }
        }
        if tiny {
            match vertex_oracle(&case.lp) {
                Some(v) if (v - sol.objective).abs() <= 1e-7 * (1.0 + v.abs()) => {}
                other => out
                    .oracle_mismatches
                    .push(format!("seed {seed}: vertex oracle {other:?}, solver {}", sol.objective)),
            }
        }
    }
    out
}
