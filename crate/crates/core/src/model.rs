//! Offloading decisions, their expected cost, and the linear programs built
//! from a scenario.
//!
//! Every cost in the model is linear in each device's task size, so a
//! distribution over task sizes only enters through its mean. The builders
//! here therefore take one expected size (bits) per device; see
//! [`task_means`] to turn distributions into those.
//!
//! Variable layout of the relaxed problem, for `I` devices and `J` UAVs:
//! `x[i][j]` at `i*J + j`, `y[i][j]` at `I*J + i*J + j`, `z[i][j]` at
//! `2*I*J + i*J + j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{worst_case_mean_distribution, AmbiguitySet, Distribution, SampleSpace};
use crate::geometry::Scenario;
use crate::lp::{LinearProgram, LpError, Relation, Sense};

/// Relative slack allowed on energy budgets when classifying a decision.
pub const ENERGY_REL_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("decision shape does not match the scenario")]
    Shape,
    #[error("entry ({i}, {j}) of {matrix} is not binary")]
    NotBinary { matrix: char, i: usize, j: usize },
    #[error("device {0} is not assigned to exactly one UAV")]
    Assignment(usize),
    #[error("UAV {0} exceeds its quota")]
    UavQuota(usize),
    #[error("HAP quota exceeded")]
    HapQuota,
    #[error("flow conservation broken at ({0}, {1})")]
    Flow(usize, usize),
    #[error("UAV {uav} uses {used} J of a {budget} J budget")]
    UavEnergy { uav: usize, used: f64, budget: f64 },
    #[error("HAP uses {used} J of a {budget} J budget")]
    HapEnergy { used: f64, budget: f64 },
}

/// Read access shared by integral and relaxed decisions.
pub trait DecisionMatrix {
    fn num_tds(&self) -> usize;
    fn num_uavs(&self) -> usize;
    fn x(&self, i: usize, j: usize) -> f64;
    fn y(&self, i: usize, j: usize) -> f64;
    fn z(&self, i: usize, j: usize) -> f64;
}

/// Binary access (`x`), UAV-compute (`y`) and relay-to-HAP (`z`) matrices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub x: Vec<Vec<u8>>,
    pub y: Vec<Vec<u8>>,
    pub z: Vec<Vec<u8>>,
}

impl OffloadDecision {
    pub fn zeros(num_tds: usize, num_uavs: usize) -> Self {
        let m = vec![vec![0; num_uavs]; num_tds];
        Self {
            x: m.clone(),
            y: m.clone(),
            z: m,
        }
    }

    /// Device `i` goes to UAV `access[i]` and is computed there when
    /// `on_uav[i]`, otherwise relayed to the HAP.
    pub fn from_routes(num_uavs: usize, access: &[usize], on_uav: &[bool]) -> Self {
        let mut d = Self::zeros(access.len(), num_uavs);
        for (i, (&j, &local)) in access.iter().zip(on_uav).enumerate() {
            d.x[i][j] = 1;
            if local {
                d.y[i][j] = 1;
            } else {
                d.z[i][j] = 1;
            }
        }
        d
    }

    /// UAV serving device `i`, if any.
    pub fn access_of(&self, i: usize) -> Option<usize> {
        self.x[i].iter().position(|&v| v == 1)
    }

    /// Checks the structural constraints (assignment, quotas, flow, binary).
    pub fn validate_structure(&self, scenario: &Scenario) -> Result<(), DecisionError> {
        let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
        let shaped = |m: &Vec<Vec<u8>>| m.len() == ni && m.iter().all(|r| r.len() == nj);
        if !(shaped(&self.x) && shaped(&self.y) && shaped(&self.z)) {
            return Err(DecisionError::Shape);
        }
        for (name, m) in [('x', &self.x), ('y', &self.y), ('z', &self.z)] {
            for (i, row) in m.iter().enumerate() {
                if let Some(j) = row.iter().position(|&v| v > 1) {
                    return Err(DecisionError::NotBinary { matrix: name, i, j });
                }
            }
        }
        for i in 0..ni {
            if self.x[i].iter().map(|&v| v as usize).sum::<usize>() != 1 {
                return Err(DecisionError::Assignment(i));
            }
            for j in 0..nj {
                if self.y[i][j] + self.z[i][j] != self.x[i][j] {
                    return Err(DecisionError::Flow(i, j));
                }
            }
        }
        for j in 0..nj {
            let load: usize = (0..ni).map(|i| self.x[i][j] as usize).sum();
            if load > scenario.quota_uav {
                return Err(DecisionError::UavQuota(j));
            }
        }
        let relayed: usize = self.z.iter().flatten().map(|&v| v as usize).sum();
        if relayed > scenario.quota_hap {
            return Err(DecisionError::HapQuota);
        }
        Ok(())
    }

    /// Structure plus both energy budgets under the given expected sizes.
    pub fn validate(&self, scenario: &Scenario, means: &[f64]) -> Result<(), DecisionError> {
        self.validate_structure(scenario)?;
        let energy = expected_energy(self, scenario, means).map_err(|_| DecisionError::Shape)?;
        energy.check_budgets(scenario)
    }
}

impl DecisionMatrix for OffloadDecision {
    fn num_tds(&self) -> usize {
        self.x.len()
    }
    fn num_uavs(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
    fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i][j] as f64
    }
    fn y(&self, i: usize, j: usize) -> f64 {
        self.y[i][j] as f64
    }
    fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i][j] as f64
    }
}

/// Continuous decision with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedDecision {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

impl RelaxedDecision {
    /// Reads the three matrices out of a primal vector laid out as in the
    /// module docs.
    pub fn from_primal(primal: &[f64], num_tds: usize, num_uavs: usize) -> Self {
        let block = num_tds * num_uavs;
        let take = |offset: usize| {
            (0..num_tds)
                .map(|i| primal[offset + i * num_uavs..offset + (i + 1) * num_uavs].to_vec())
                .collect()
        };
        Self {
            x: take(0),
            y: take(block),
            z: take(2 * block),
        }
    }
}

impl DecisionMatrix for RelaxedDecision {
    fn num_tds(&self) -> usize {
        self.x.len()
    }
    fn num_uavs(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
    fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i][j]
    }
    fn y(&self, i: usize, j: usize) -> f64 {
        self.y[i][j]
    }
    fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i][j]
    }
}

/// Expected task size (bits) of each device under its distribution.
pub fn task_means(distributions: &[Distribution], space: &SampleSpace) -> Vec<f64> {
    distributions.iter().map(|d| d.mean(space)).collect()
}

fn check_shape<D: DecisionMatrix>(d: &D, scenario: &Scenario, means: &[f64]) -> Result<(), ModelError> {
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    if d.num_tds() != ni || d.num_uavs() != nj || means.len() != ni {
        return Err(ModelError::Shape(format!(
            "scenario is {ni}x{nj}, decision {}x{}, {} task means",
            d.num_tds(),
            d.num_uavs(),
            means.len()
        )));
    }
    Ok(())
}

/// Per-bit delay of device `i`'s route under `d`.
fn route_delay<D: DecisionMatrix>(d: &D, scenario: &Scenario, i: usize) -> f64 {
    let c = &scenario.compute;
    let hap_delay = c.hap_cycles_per_bit / c.hap_capability;
    let uav_delay = c.uav_cycles_per_bit / c.uav_capability;
    (0..scenario.num_uavs())
        .map(|j| {
            d.x(i, j) / scenario.rate_td_uav[i][j]
                + d.y(i, j) * uav_delay
                + d.z(i, j) * (1.0 / scenario.rate_uav_hap[j] + hap_delay)
        })
        .sum()
}

/// `sum_i E[phi_i] * (per-bit delay of device i's route)`, seconds.
pub fn expected_latency<D: DecisionMatrix>(
    decision: &D,
    scenario: &Scenario,
    means: &[f64],
) -> Result<f64, ModelError> {
    check_shape(decision, scenario, means)?;
    Ok((0..scenario.num_tds())
        .map(|i| means[i] * route_delay(decision, scenario, i))
        .sum())
}

/// Energy drawn by each UAV and by the HAP, basic costs included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyUse {
    pub uav: Vec<f64>,
    pub hap: f64,
}

impl EnergyUse {
    /// Transmission and compute energy only, summed over all nodes.
    pub fn dynamic_total(&self, scenario: &Scenario) -> f64 {
        let e = &scenario.energy;
        self.uav.iter().map(|u| u - e.uav_basic).sum::<f64>() + (self.hap - e.hap_basic)
    }

    pub fn max_uav(&self) -> f64 {
        self.uav.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nodes over budget by more than [`ENERGY_REL_TOL`] relative.
    pub fn violations(&self, scenario: &Scenario) -> usize {
        let e = &scenario.energy;
        let over = |used: f64, budget: f64| used > budget * (1.0 + ENERGY_REL_TOL);
        self.uav.iter().filter(|&&u| over(u, e.uav_budget)).count()
            + usize::from(over(self.hap, e.hap_budget))
    }

    pub fn check_budgets(&self, scenario: &Scenario) -> Result<(), DecisionError> {
        let e = &scenario.energy;
        for (j, &used) in self.uav.iter().enumerate() {
            if used > e.uav_budget * (1.0 + ENERGY_REL_TOL) {
                return Err(DecisionError::UavEnergy {
                    uav: j,
                    used,
                    budget: e.uav_budget,
                });
            }
        }
        if self.hap > e.hap_budget * (1.0 + ENERGY_REL_TOL) {
            return Err(DecisionError::HapEnergy {
                used: self.hap,
                budget: e.hap_budget,
            });
        }
        Ok(())
    }
}

pub fn expected_energy<D: DecisionMatrix>(
    decision: &D,
    scenario: &Scenario,
    means: &[f64],
) -> Result<EnergyUse, ModelError> {
    check_shape(decision, scenario, means)?;
    let coeffs = scenario.per_bit_coefficients();
    let e = &scenario.energy;
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    let mut uav = vec![e.uav_basic; nj];
    let mut hap = e.hap_basic;
    for i in 0..ni {
        for (j, u) in uav.iter_mut().enumerate() {
            *u += means[i]
                * (decision.z(i, j) * coeffs.uav_relay_energy[j]
                    + decision.y(i, j) * coeffs.uav_compute_energy[j]);
            hap += means[i] * decision.z(i, j) * coeffs.hap_compute_energy;
        }
    }
    Ok(EnergyUse { uav, hap })
}

/// Index helper for the relaxed problem's variables and rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct P2Layout {
    pub num_tds: usize,
    pub num_uavs: usize,
}

impl P2Layout {
    pub fn new(num_tds: usize, num_uavs: usize) -> Self {
        Self { num_tds, num_uavs }
    }

    fn block(&self) -> usize {
        self.num_tds * self.num_uavs
    }

    pub fn num_vars(&self) -> usize {
        3 * self.block()
    }

    pub fn x_var(&self, i: usize, j: usize) -> usize {
        i * self.num_uavs + j
    }

    pub fn y_var(&self, i: usize, j: usize) -> usize {
        self.block() + i * self.num_uavs + j
    }

    pub fn z_var(&self, i: usize, j: usize) -> usize {
        2 * self.block() + i * self.num_uavs + j
    }

    pub fn assign_row(&self, i: usize) -> usize {
        i
    }

    pub fn uav_quota_row(&self, j: usize) -> usize {
        self.num_tds + j
    }

    pub fn hap_quota_row(&self) -> usize {
        self.num_tds + self.num_uavs
    }

    pub fn flow_row(&self, i: usize, j: usize) -> usize {
        self.num_tds + self.num_uavs + 1 + i * self.num_uavs + j
    }

    pub fn uav_energy_row(&self, j: usize) -> usize {
        self.num_tds + self.num_uavs + 1 + self.block() + j
    }

    pub fn hap_energy_row(&self) -> usize {
        self.num_tds + 2 * self.num_uavs + 1 + self.block()
    }

    pub fn num_rows(&self) -> usize {
        self.hap_energy_row() + 1
    }
}

/// Continuous relaxation of the offloading problem for fixed expected sizes:
/// minimize expected latency subject to assignment, UAV and HAP quotas, flow
/// conservation, both energy budgets and `0 <= x, y, z <= 1`.
pub fn build_p2(scenario: &Scenario, means: &[f64]) -> Result<(LinearProgram, P2Layout), ModelError> {
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    if means.len() != ni {
        return Err(ModelError::Shape(format!("{} task means for {ni} devices", means.len())));
    }
    let layout = P2Layout::new(ni, nj);
    let n = layout.num_vars();
    let coeffs = scenario.per_bit_coefficients();
    let e = &scenario.energy;

    let mut objective = vec![0.0; n];
    for i in 0..ni {
        for j in 0..nj {
            objective[layout.x_var(i, j)] = means[i] * coeffs.access_delay[i][j];
            objective[layout.y_var(i, j)] = means[i] * coeffs.uav_compute_delay[j];
            objective[layout.z_var(i, j)] = means[i] * coeffs.relay_path_delay[j];
        }
    }
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for i in 0..ni {
        for j in 0..nj {
            for (var, tag) in [
                (layout.x_var(i, j), 'x'),
                (layout.y_var(i, j), 'y'),
                (layout.z_var(i, j), 'z'),
            ] {
                lp.set_bounds(var, 0.0, 1.0);
                lp.set_var_name(var, format!("{tag}({i},{j})"));
            }
        }
    }

    for i in 0..ni {
        let mut row = vec![0.0; n];
        for j in 0..nj {
            row[layout.x_var(i, j)] = 1.0;
        }
        lp.add_constraint(row, Relation::Eq, 1.0, format!("assign({i})"));
    }
    for j in 0..nj {
        let mut row = vec![0.0; n];
        for i in 0..ni {
            row[layout.x_var(i, j)] = 1.0;
        }
        lp.add_constraint(row, Relation::Le, scenario.quota_uav as f64, format!("uav_quota({j})"));
    }
    let mut row = vec![0.0; n];
    for i in 0..ni {
        for j in 0..nj {
            row[layout.z_var(i, j)] = 1.0;
        }
    }
    lp.add_constraint(row, Relation::Le, scenario.quota_hap as f64, "hap_quota");
    for i in 0..ni {
        for j in 0..nj {
            let mut row = vec![0.0; n];
            row[layout.y_var(i, j)] = 1.0;
            row[layout.z_var(i, j)] = 1.0;
            row[layout.x_var(i, j)] = -1.0;
            lp.add_constraint(row, Relation::Eq, 0.0, format!("flow({i},{j})"));
        }
    }
    for j in 0..nj {
        let mut row = vec![0.0; n];
        for i in 0..ni {
            row[layout.z_var(i, j)] = means[i] * coeffs.uav_relay_energy[j];
            row[layout.y_var(i, j)] = means[i] * coeffs.uav_compute_energy[j];
        }
        lp.add_constraint(row, Relation::Le, e.uav_budget - e.uav_basic, format!("uav_energy({j})"));
    }
    let mut row = vec![0.0; n];
    for i in 0..ni {
        for j in 0..nj {
            row[layout.z_var(i, j)] = means[i] * coeffs.hap_compute_energy;
        }
    }
    lp.add_constraint(row, Relation::Le, e.hap_budget - e.hap_basic, "hap_energy");
    debug_assert_eq!(lp.num_constraints(), layout.num_rows());
    Ok((lp, layout))
}

/// Variable layout of the dual problem built by [`build_p3`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct P3Layout {
    pub num_tds: usize,
    pub num_uavs: usize,
}

impl P3Layout {
    /// Multiplier of the assignment equality of device `i` (free).
    pub fn assign(&self, i: usize) -> usize {
        i
    }
    /// Multiplier of UAV `j`'s quota (nonnegative).
    pub fn uav_quota(&self, j: usize) -> usize {
        self.num_tds + j
    }
    /// Multiplier of the HAP quota (nonnegative).
    pub fn hap_quota(&self) -> usize {
        self.num_tds + self.num_uavs
    }
    /// Multiplier of the flow equality at `(i, j)` (free).
    pub fn flow(&self, i: usize, j: usize) -> usize {
        self.num_tds + self.num_uavs + 1 + i * self.num_uavs + j
    }
    /// Multiplier of UAV `j`'s energy budget (nonnegative).
    pub fn uav_energy(&self, j: usize) -> usize {
        self.num_tds + self.num_uavs + 1 + self.num_tds * self.num_uavs + j
    }
    /// Multiplier of the HAP energy budget (nonnegative).
    pub fn hap_energy(&self) -> usize {
        self.num_tds + 2 * self.num_uavs + 1 + self.num_tds * self.num_uavs
    }
    pub fn num_vars(&self) -> usize {
        self.hap_energy() + 1
    }
}

/// Dual of [`build_p2`]. The upper box bounds of the primal are implied by
/// the assignment and flow rows, so they carry no multipliers here.
///
/// ```text
/// max  sum_i a_i - N_u sum_j q_j - N_H h - sum_j (E_j^max - E_j^bas) u_j - (E_H^max - E_H^bas) v
/// s.t. a_i - q_j - g_ij                                       <= m_i / R_ij
///      g_ij - m_i (beta_U C_j^2 lambda_j) u_j                 <= m_i lambda_j / C_j
///      g_ij - h - m_i (P_j / R_jH) u_j - m_i (beta_H C_H^2 lambda_H) v
///                                                             <= m_i (1 / R_jH + lambda_H / C_H)
///      q, h, u, v >= 0;  a, g free
/// ```
pub fn build_p3(scenario: &Scenario, means: &[f64]) -> Result<(LinearProgram, P3Layout), ModelError> {
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    if means.len() != ni {
        return Err(ModelError::Shape(format!("{} task means for {ni} devices", means.len())));
    }
    let layout = P3Layout {
        num_tds: ni,
        num_uavs: nj,
    };
    let n = layout.num_vars();
    let coeffs = scenario.per_bit_coefficients();
    let e = &scenario.energy;

    let mut objective = vec![0.0; n];
    for i in 0..ni {
        objective[layout.assign(i)] = 1.0;
    }
    for j in 0..nj {
        objective[layout.uav_quota(j)] = -(scenario.quota_uav as f64);
        objective[layout.uav_energy(j)] = -(e.uav_budget - e.uav_basic);
    }
    objective[layout.hap_quota()] = -(scenario.quota_hap as f64);
    objective[layout.hap_energy()] = -(e.hap_budget - e.hap_basic);

    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for i in 0..ni {
        lp.set_bounds(layout.assign(i), f64::NEG_INFINITY, f64::INFINITY);
        lp.set_var_name(layout.assign(i), format!("a_assign({i})"));
        for j in 0..nj {
            lp.set_bounds(layout.flow(i, j), f64::NEG_INFINITY, f64::INFINITY);
            lp.set_var_name(layout.flow(i, j), format!("a_flow({i},{j})"));
        }
    }
    for j in 0..nj {
        lp.set_var_name(layout.uav_quota(j), format!("a_uav_quota({j})"));
        lp.set_var_name(layout.uav_energy(j), format!("a_uav_energy({j})"));
    }
    lp.set_var_name(layout.hap_quota(), "a_hap_quota");
    lp.set_var_name(layout.hap_energy(), "a_hap_energy");

    for i in 0..ni {
        let m = means[i];
        for j in 0..nj {
            let mut row = vec![0.0; n];
            row[layout.assign(i)] = 1.0;
            row[layout.uav_quota(j)] = -1.0;
            row[layout.flow(i, j)] = -1.0;
            lp.add_constraint(row, Relation::Le, m * coeffs.access_delay[i][j], format!("dual_x({i},{j})"));

            let mut row = vec![0.0; n];
            row[layout.flow(i, j)] = 1.0;
            row[layout.uav_energy(j)] = -m * coeffs.uav_compute_energy[j];
            lp.add_constraint(row, Relation::Le, m * coeffs.uav_compute_delay[j], format!("dual_y({i},{j})"));

            let mut row = vec![0.0; n];
            row[layout.flow(i, j)] = 1.0;
            row[layout.hap_quota()] = -1.0;
            row[layout.uav_energy(j)] = -m * coeffs.uav_relay_energy[j];
            row[layout.hap_energy()] = -m * coeffs.hap_compute_energy;
            lp.add_constraint(row, Relation::Le, m * coeffs.relay_path_delay[j], format!("dual_z({i},{j})"));
        }
    }
    Ok((lp, layout))
}

/// Worst-case distribution of every device. All latency and energy
/// coefficients on a task size are nonnegative, so for any decision the
/// inner maximization separates per device into maximizing its mean.
pub fn worst_case_distributions(sets: &[AmbiguitySet]) -> Vec<Distribution> {
    sets.iter().map(|s| worst_case_mean_distribution(s).0).collect()
}

/// Worst-case expected size of each device, bits.
pub fn worst_case_means(sets: &[AmbiguitySet]) -> Vec<f64> {
    sets.iter().map(|s| worst_case_mean_distribution(s).1).collect()
}

/// Built problem size next to the closed-form counts `n1 = 3IJ` and
/// `A1 = 6IJ + 2J + I`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub num_tds: usize,
    pub num_uavs: usize,
    pub num_vars: usize,
    /// Explicit rows of the built LP.
    pub num_rows: usize,
    /// Finite upper bounds carried as variable bounds.
    pub num_box_bounds: usize,
    pub reference_vars: usize,
    pub reference_constraints: usize,
    pub vars_match: bool,
    pub constraints_match: bool,
    pub note: String,
}

pub fn dimension_report(scenario: &Scenario) -> DimensionReport {
    let (ni, nj) = (scenario.num_tds(), scenario.num_uavs());
    let means = vec![1.0; ni];
    let (lp, _) = build_p2(scenario, &means).expect("means match device count");
    let num_box_bounds = lp.upper.iter().filter(|u| u.is_finite()).count();
    let reference_vars = 3 * ni * nj;
    let reference_constraints = 6 * ni * nj + 2 * nj + ni;
    let counted = lp.num_constraints() + num_box_bounds;
    let constraints_match = counted == reference_constraints;
    let note = if constraints_match {
        "row counts agree".to_string()
    } else {
        format!(
            "built {} rows + {} box bounds = {}; reference count {} replicates the HAP quota and \
             HAP energy rows once per (i, j) pair, here each is a single global row",
            lp.num_constraints(),
            num_box_bounds,
            counted,
            reference_constraints
        )
    };
    DimensionReport {
        num_tds: ni,
        num_uavs: nj,
        num_vars: lp.num_vars(),
        num_rows: lp.num_constraints(),
        num_box_bounds,
        reference_vars,
        reference_constraints,
        vars_match: lp.num_vars() == reference_vars,
        constraints_match,
        note,
    }
}
