//! Dive-and-fix integerization of the relaxed offloading problem, the two
//! point-estimate baselines, and a brute-force oracle for small instances.
//!
//! The dive first settles the access matrix `x`, then the compute matrix
//! `y`; `z` follows from flow conservation. Each step fixes every relaxed
//! entry that is already integral, branches on the most fractional remaining
//! entry (ties go to the smallest `(i, j)`), solves both children and keeps
//! the cheaper one. Fixed variables are never revisited.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::AmbiguitySet;
use crate::geometry::Scenario;
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::model::{
    build_p2, expected_energy, expected_latency, worst_case_means, ModelError, OffloadDecision,
    P2Layout, RelaxedDecision,
};

/// Relaxed values within this distance of 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Largest instance the exhaustive oracle accepts.
pub const EXHAUSTIVE_MAX_TDS: usize = 6;
pub const EXHAUSTIVE_MAX_UAVS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Worst-case distributions over the ambiguity sets, then the dive.
    Dro,
    /// Every task sized at the mean atom.
    Do,
    /// Every task sized at the largest atom.
    Ro,
    /// Full enumeration (small instances only).
    Exhaustive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dro => "dro",
            Method::Do => "do",
            Method::Ro => "ro",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dro" | "mdrloa" => Ok(Method::Dro),
            "do" => Ok(Method::Do),
            "ro" => Ok(Method::Ro),
            "exhaustive" => Ok(Method::Exhaustive),
            other => Err(format!("unknown method '{other}' (expected dro, do, ro or exhaustive)")),
        }
    }
}

/// One fixed variable of the dive: matrix tag, indices and value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixing {
    pub matrix: char,
    pub i: usize,
    pub j: usize,
    pub value: u8,
}

impl std::fmt::Display for Fixing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({},{})={}", self.matrix, self.i, self.j, self.value)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("relaxed problem is infeasible: {0}")]
    Infeasible(String),
    #[error("both branches on {branch} are infeasible after fixing [{}]", fmt_fixings(.fixings))]
    Backtrack { branch: Fixing, fixings: Vec<Fixing> },
    #[error("instance with {num_tds} devices and {num_uavs} UAVs exceeds the exhaustive limit")]
    TooLarge { num_tds: usize, num_uavs: usize },
    #[error("point estimate must be positive and finite, got {0}")]
    InvalidEstimate(f64),
    #[error("relaxed problem is unbounded")]
    Unbounded,
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn fmt_fixings(f: &[Fixing]) -> String {
    f.iter().map(Fixing::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub method: Method,
    pub decision: OffloadDecision,
    /// Expected task size per device used for planning (bits); the
    /// worst-case means for [`Method::Dro`].
    pub planning_means: Vec<f64>,
    /// Expected latency of `decision` under `planning_means`, seconds.
    pub planned_latency: f64,
    /// Optimum of the root relaxation, seconds.
    pub relaxation_bound: f64,
    pub lp_solve_count: usize,
    /// Relaxed objective after each accepted branch, root first.
    pub dive_objectives: Vec<f64>,
    /// Fractional `x` entries of the root relaxation.
    pub fractional_x_root: usize,
    /// Fractional `y` entries when the `x` phase ends.
    pub fractional_y_after_x: usize,
}

/// Most fractional entry of `m`, or `None` when every entry is integral.
pub fn select_branch(m: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let score = v.min(1.0 - v);
            if score <= INTEGRALITY_TOL {
                continue;
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some(((i, j), score));
            }
        }
    }
    best.map(|(ij, _)| ij)
}

pub fn select_branch_x(x: &[Vec<f64>]) -> Option<(usize, usize)> {
    select_branch(x)
}

pub fn select_branch_y(y: &[Vec<f64>]) -> Option<(usize, usize)> {
    select_branch(y)
}

struct Dive<'a> {
    base: LinearProgram,
    layout: P2Layout,
    fixings: Vec<Fixing>,
    lp_solves: usize,
    objectives: Vec<f64>,
    scenario: &'a Scenario,
}

struct Relaxed {
    objective: f64,
    decision: RelaxedDecision,
}

impl<'a> Dive<'a> {
    fn var(&self, f: &Fixing) -> usize {
        match f.matrix {
            'x' => self.layout.x_var(f.i, f.j),
            _ => self.layout.y_var(f.i, f.j),
        }
    }

    fn solve_with(&mut self, extra: Option<Fixing>) -> Result<Option<Relaxed>, SolveError> {
        let mut lp = self.base.clone();
        for f in self.fixings.iter().chain(extra.as_ref()) {
            let v = self.var(f);
            lp.set_bounds(v, f.value as f64, f.value as f64);
        }
        self.lp_solves += 1;
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some(Relaxed {
                objective: sol.objective,
                decision: RelaxedDecision::from_primal(
                    &sol.primal,
                    self.scenario.num_tds(),
                    self.scenario.num_uavs(),
                ),
            })),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(SolveError::Unbounded),
        }
    }

    fn is_fixed(&self, matrix: char, i: usize, j: usize) -> bool {
        self.fixings
            .iter()
            .any(|f| f.matrix == matrix && f.i == i && f.j == j)
    }

    /// Runs one phase of the dive on matrix `tag`, starting from `current`.
    fn phase(&mut self, tag: char, mut current: Relaxed) -> Result<Relaxed, SolveError> {
        loop {
            let m = match tag {
                'x' => current.decision.x.clone(),
                _ => current.decision.y.clone(),
            };
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v.min(1.0 - v) <= INTEGRALITY_TOL && !self.is_fixed(tag, i, j) {
                        self.fixings.push(Fixing {
                            matrix: tag,
                            i,
                            j,
                            value: u8::from(v > 0.5),
                        });
                    }
                }
            }
            let Some((i, j)) = select_branch(&m) else {
                return Ok(current);
            };
            let branch = |value| Fixing {
                matrix: tag,
                i,
                j,
                value,
            };
            let zero = self.solve_with(Some(branch(0)))?;
            let one = self.solve_with(Some(branch(1)))?;
            let (value, next) = match (zero, one) {
                (Some(a), Some(b)) if a.objective < b.objective => (0, a),
                (_, Some(b)) => (1, b),
                (Some(a), None) => (0, a),
                (None, None) => {
                    return Err(SolveError::Backtrack {
                        branch: branch(1),
                        fixings: self.fixings.clone(),
                    })
                }
            };
            self.fixings.push(branch(value));
            self.objectives.push(next.objective);
            current = next;
        }
    }
}

fn count_fractional(m: &[Vec<f64>]) -> usize {
    m.iter()
        .flatten()
        .filter(|&&v| v.min(1.0 - v) > INTEGRALITY_TOL)
        .count()
}

fn round_matrix(m: &[Vec<f64>]) -> Vec<Vec<u8>> {
    m.iter()
        .map(|r| r.iter().map(|&v| u8::from(v > 0.5)).collect())
        .collect()
}

/// Dive-and-fix on the relaxation built from `means` (bits per device).
pub fn dive_and_fix(scenario: &Scenario, means: &[f64], method: Method) -> Result<SolveResult, SolveError> {
    let (base, layout) = build_p2(scenario, means)?;
    let mut dive = Dive {
        base,
        layout,
        fixings: Vec::new(),
        lp_solves: 0,
        objectives: Vec::new(),
        scenario,
    };
    let root = dive
        .solve_with(None)?
        .ok_or_else(|| SolveError::Infeasible(infeasibility_hint(scenario)))?;
    let relaxation_bound = root.objective;
    dive.objectives.push(root.objective);
    let fractional_x_root = count_fractional(&root.decision.x);
    let after_x = dive.phase('x', root)?;
    let fractional_y_after_x = count_fractional(&after_x.decision.y);
    let last = dive.phase('y', after_x)?;

    let x = round_matrix(&last.decision.x);
    let y = round_matrix(&last.decision.y);
    let mut z = vec![vec![0u8; scenario.num_uavs()]; scenario.num_tds()];
    for i in 0..scenario.num_tds() {
        for j in 0..scenario.num_uavs() {
            let derived = x[i][j] as i8 - y[i][j] as i8;
            let relaxed = last.decision.z[i][j];
            if !(0..=1).contains(&derived) || (relaxed - derived as f64).abs() > INTEGRALITY_TOL {
                return Err(SolveError::Internal(format!(
                    "derived z({i},{j}) = {derived} disagrees with relaxed value {relaxed}"
                )));
            }
            z[i][j] = derived as u8;
        }
    }
    let decision = OffloadDecision { x, y, z };
    decision
        .validate(scenario, means)
        .map_err(|e| SolveError::Internal(format!("dive produced an infeasible decision: {e}")))?;
    let planned_latency = expected_latency(&decision, scenario, means)?;
    Ok(SolveResult {
        method,
        decision,
        planning_means: means.to_vec(),
        planned_latency,
        relaxation_bound,
        lp_solve_count: dive.lp_solves,
        dive_objectives: dive.objectives,
        fractional_x_root,
        fractional_y_after_x,
    })
}

fn infeasibility_hint(scenario: &Scenario) -> String {
    let capacity = scenario.num_uavs() * scenario.quota_uav;
    if capacity < scenario.num_tds() {
        format!(
            "{} devices exceed the total UAV capacity of {} ({} UAVs x quota {})",
            scenario.num_tds(),
            capacity,
            scenario.num_uavs(),
            scenario.quota_uav
        )
    } else {
        "quota and energy constraints admit no assignment".to_string()
    }
}

/// Dive on the worst-case means of each device's ambiguity set.
pub fn mdrloa_solve(scenario: &Scenario, sets: &[AmbiguitySet]) -> Result<SolveResult, SolveError> {
    if sets.len() != scenario.num_tds() {
        return Err(ModelError::Shape(format!(
            "{} ambiguity sets for {} devices",
            sets.len(),
            scenario.num_tds()
        ))
        .into());
    }
    dive_and_fix(scenario, &worst_case_means(sets), Method::Dro)
}

/// Dive with every device's task sized at `estimate` bits.
pub fn baseline_deterministic(
    scenario: &Scenario,
    estimate: f64,
    method: Method,
) -> Result<SolveResult, SolveError> {
    if !(estimate.is_finite() && estimate > 0.0) {
        return Err(SolveError::InvalidEstimate(estimate));
    }
    dive_and_fix(scenario, &vec![estimate; scenario.num_tds()], method)
}

/// Minimum expected-latency integral decision by enumeration of every
/// access assignment and compute/relay split.
pub fn exhaustive_solve(scenario: &Scenario, means: &[f64]) -> Result<SolveResult, SolveError> {
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    if ni > EXHAUSTIVE_MAX_TDS || nj > EXHAUSTIVE_MAX_UAVS {
        return Err(SolveError::TooLarge {
            num_tds: ni,
            num_uavs: nj,
        });
    }
    if means.len() != ni {
        return Err(ModelError::Shape(format!("{} task means for {ni} devices", means.len())).into());
    }
    let (root, _) = build_p2(scenario, means)?;
    let relax = solve_lp(&root)?;

    let mut best: Option<(f64, OffloadDecision)> = None;
    let mut access = vec![0usize; ni];
    let assignments = nj.pow(ni as u32);
    for code in 0..assignments {
        let mut c = code;
        let mut load = vec![0usize; nj];
        for a in access.iter_mut() {
            *a = c % nj;
            c /= nj;
            load[*a] += 1;
        }
        if load.iter().any(|&l| l > scenario.quota_uav) {
            continue;
        }
        for split in 0u32..(1 << ni) {
            let relayed = (ni as u32) - split.count_ones();
            if relayed as usize > scenario.quota_hap {
                continue;
            }
            let on_uav: Vec<bool> = (0..ni).map(|i| split >> i & 1 == 1).collect();
            let d = OffloadDecision::from_routes(nj, &access, &on_uav);
            if expected_energy(&d, scenario, means)?.check_budgets(scenario).is_err() {
                continue;
            }
            let lat = expected_latency(&d, scenario, means)?;
            if best.as_ref().is_none_or(|(b, _)| lat < *b) {
                best = Some((lat, d));
            }
        }
    }
    let (planned_latency, decision) = best.ok_or_else(|| SolveError::Infeasible(infeasibility_hint(scenario)))?;
    Ok(SolveResult {
        method: Method::Exhaustive,
        decision,
        planning_means: means.to_vec(),
        planned_latency,
        relaxation_bound: if relax.is_optimal() { relax.objective } else { f64::NAN },
        lp_solve_count: 1,
        dive_objectives: Vec::new(),
        fractional_x_root: 0,
        fractional_y_after_x: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, ScenarioConfig};

    fn scenario(num_tds: usize, num_uavs: usize, quota_uav: usize, seed: u64) -> Scenario {
        generate_scenario(
            &ScenarioConfig {
                num_tds,
                num_uavs,
                quota_uav,
                ..ScenarioConfig::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn branch_selection() {
        assert_eq!(select_branch_x(&[vec![0.5, 0.9, 0.1]]), Some((0, 0)));
        assert_eq!(select_branch_x(&[vec![0.9, 0.1, 0.5]]), Some((0, 2)));
        assert_eq!(select_branch_x(&[vec![0.0, 1.0], vec![1.0 - 1e-7, 1e-9]]), None);
        assert_eq!(select_branch_y(&[vec![0.6, 0.4]]), Some((0, 0)));
        assert_eq!(select_branch_y(&[vec![1.0, 0.0], vec![0.4, 0.6]]), Some((1, 0)));
    }

    #[test]
    fn method_parse_roundtrip() {
        for m in [Method::Dro, Method::Do, Method::Ro, Method::Exhaustive] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn two_devices_one_uav_take_cheaper_path() {
        let s = scenario(2, 1, 2, 4);
        let r = baseline_deterministic(&s, 15e6, Method::Do).unwrap();
        assert_eq!(r.decision.x, vec![vec![1], vec![1]]);
        let c = s.per_bit_coefficients();
        let local = c.uav_compute_delay[0] < c.relay_path_delay[0];
        assert_eq!(r.decision.y, vec![vec![u8::from(local)]; 2]);
    }

    #[test]
    fn pigeonhole_is_infeasible() {
        let s = scenario(3, 1, 2, 1);
        let err = baseline_deterministic(&s, 15e6, Method::Do).unwrap_err();
        assert!(matches!(err, SolveError::Infeasible(ref m) if m.contains("capacity")));
        assert!(matches!(exhaustive_solve(&s, &[15e6; 3]), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn rejects_bad_estimate() {
        let s = scenario(2, 1, 2, 1);
        assert!(matches!(
            baseline_deterministic(&s, 0.0, Method::Do),
            Err(SolveError::InvalidEstimate(_))
        ));
    }

    #[test]
    fn balanced_quota_matches_oracle() {
        let s = scenario(4, 2, 2, 8);
        let means = [15e6; 4];
        let r = dive_and_fix(&s, &means, Method::Do).unwrap();
        for j in 0..2 {
            assert_eq!((0..4).map(|i| r.decision.x[i][j]).sum::<u8>(), 2);
        }
        let best = exhaustive_solve(&s, &means).unwrap();
        assert!(r.relaxation_bound <= best.planned_latency * (1.0 + 1e-9));
        assert!(best.planned_latency <= r.planned_latency * (1.0 + 1e-12));
        assert!(r.planned_latency <= 1.1 * best.planned_latency);
    }

    #[test]
    fn exhaustive_small_cases() {
        let s = scenario(1, 1, 1, 3);
        let r = exhaustive_solve(&s, &[3e6]).unwrap();
        let c = s.per_bit_coefficients();
        let local = c.uav_compute_delay[0] < c.relay_path_delay[0];
        assert_eq!(r.decision.y[0][0], u8::from(local));

        // one device per UAV: only the two perfect matchings are admissible
        let s = scenario(2, 2, 1, 3);
        let r = exhaustive_solve(&s, &[3e6; 2]).unwrap();
        assert_ne!(r.decision.access_of(0), r.decision.access_of(1));

        let big = scenario(7, 2, 7, 3);
        assert!(matches!(exhaustive_solve(&big, &[1.0; 7]), Err(SolveError::TooLarge { .. })));
    }

    #[test]
    fn dive_is_deterministic_and_monotone() {
        let s = scenario(10, 3, 4, 21);
        let a = baseline_deterministic(&s, 18.6e6, Method::Do).unwrap();
        let b = baseline_deterministic(&s, 18.6e6, Method::Do).unwrap();
        assert_eq!(a, b);
        for w in a.dive_objectives.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9));
        }
        assert!(a.planned_latency >= a.relaxation_bound - 1e-6);
    }
}
