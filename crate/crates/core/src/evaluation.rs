//! Monte Carlo comparison of the planning methods: draw a history, plan,
//! then charge each plan with one set of true task sizes.

use std::fmt;
use std::io::Write;

use rand::distributions::{Distribution as _, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{
    empirical_distribution, generate_history, generate_history_indexed, tolerance_from_confidence,
    AmbiguityError, AmbiguitySet, Distribution, HistoryLog, SampleSpace,
};
use crate::geometry::{generate_scenario, Scenario, ScenarioConfig, ScenarioError};
use crate::mdrloa::{
    baseline_deterministic, exhaustive_solve, mdrloa_solve, Method, SolveError, SolveResult,
};
use crate::model::{expected_energy, expected_latency, worst_case_means, EnergyUse, ModelError, OffloadDecision};
use crate::rng::{stream_rng_indexed, Stream};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no seeds given")]
    NoSeeds,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How the L1 radius of each ambiguity set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusSpec {
    /// Fixed radius.
    Tolerance(f64),
    /// Radius derived from the history length at this confidence level.
    Confidence(f64),
}

impl RadiusSpec {
    pub fn resolve(self, num_atoms: usize, history_len: usize) -> Result<f64, AmbiguityError> {
        match self {
            RadiusSpec::Tolerance(eps) if eps >= 0.0 && eps.is_finite() => Ok(eps),
            RadiusSpec::Tolerance(eps) => Err(AmbiguityError::Domain(format!(
                "tolerance must be finite and >= 0, got {eps}"
            ))),
            RadiusSpec::Confidence(nu) => tolerance_from_confidence(num_atoms, history_len, nu),
        }
    }
}

/// Everything one comparison run needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub space: SampleSpace,
    pub history_len: usize,
    pub radius: RadiusSpec,
    /// Distribution that generates both the history and the realized sizes.
    pub truth: Distribution,
    /// One history per device instead of one shared history.
    pub per_device_history: bool,
    pub methods: Vec<Method>,
}

/// True task sizes of one seed, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub task_sizes: Vec<f64>,
    pub seed: u64,
}

/// Draws each device's true size from `truth`, device `i` on its own stream.
pub fn draw_realization(
    truth: &Distribution,
    space: &SampleSpace,
    num_tds: usize,
    seed: u64,
) -> Result<Realization, AmbiguityError> {
    if truth.len() != space.len() {
        return Err(AmbiguityError::Shape {
            left: truth.len(),
            right: space.len(),
        });
    }
    let picker = WeightedIndex::new(truth.probs())
        .map_err(|e| AmbiguityError::InvalidDistribution(e.to_string()))?;
    let task_sizes = (0..num_tds)
        .map(|i| {
            let mut rng = stream_rng_indexed(seed, Stream::Realization, i as u64);
            space.atoms()[picker.sample(&mut rng)]
        })
        .collect();
    Ok(Realization { task_sizes, seed })
}

/// Latency of `decision` when every task has its realized size.
pub fn realized_latency(
    decision: &OffloadDecision,
    scenario: &Scenario,
    realization: &Realization,
) -> Result<f64, ModelError> {
    expected_latency(decision, scenario, &realization.task_sizes)
}

/// Realized energy per node and the number of nodes over budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedEnergy {
    pub energy: EnergyUse,
    pub violations: usize,
}

pub fn realized_energy(
    decision: &OffloadDecision,
    scenario: &Scenario,
    realization: &Realization,
) -> Result<RealizedEnergy, ModelError> {
    let energy = expected_energy(decision, scenario, &realization.task_sizes)?;
    let violations = energy.violations(scenario);
    Ok(RealizedEnergy { energy, violations })
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub method: Method,
    pub seed: u64,
    pub param_name: String,
    pub param_value: Option<f64>,
    /// Whether the method produced a decision.
    pub feasible: bool,
    pub realized_latency: Option<f64>,
    pub uav_energy: Vec<f64>,
    pub hap_energy: Option<f64>,
    /// Transmission plus compute energy over all nodes, basic costs excluded.
    pub dynamic_energy: Option<f64>,
    pub budget_violations: usize,
    pub planned_latency: Option<f64>,
    pub lp_solve_count: usize,
    pub error: Option<String>,
    pub decision: Option<OffloadDecision>,
}

impl EvaluationRow {
    pub fn max_uav_energy(&self) -> Option<f64> {
        self.uav_energy.iter().copied().reduce(f64::max)
    }
}

/// Mean and sample standard deviation over the feasible rows of one
/// (parameter value, method) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub param_name: String,
    pub param_value: Option<f64>,
    pub runs: usize,
    pub feasible_runs: usize,
    pub mean_latency: Option<f64>,
    pub std_latency: Option<f64>,
    pub mean_dynamic_energy: Option<f64>,
    pub std_dynamic_energy: Option<f64>,
    pub budget_violations: usize,
}

/// Relative gaps of the robust method against the baselines, percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub param_value: Option<f64>,
    /// `(DO - DRO) / DO` on mean realized latency.
    pub latency_reduction_vs_do_pct: Option<f64>,
    /// `(RO - DRO) / RO` on mean dynamic energy.
    pub energy_saving_vs_ro_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<EvaluationRow>,
    pub aggregates: Vec<Aggregate>,
    pub headlines: Vec<Headline>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

impl EvaluationReport {
    /// Sorts rows into canonical order and recomputes the summaries, so the
    /// report does not depend on the order rows were produced in.
    pub fn from_rows(mut rows: Vec<EvaluationRow>) -> Self {
        rows.sort_by(|a, b| {
            a.param_value
                .unwrap_or(f64::NEG_INFINITY)
                .total_cmp(&b.param_value.unwrap_or(f64::NEG_INFINITY))
                .then(a.seed.cmp(&b.seed))
                .then(a.method.cmp(&b.method))
        });
        let mut aggregates: Vec<Aggregate> = Vec::new();
        let mut groups: Vec<(Option<f64>, Method)> = rows.iter().map(|r| (r.param_value, r.method)).collect();
        groups.sort_by(|a, b| {
            a.0.unwrap_or(f64::NEG_INFINITY)
                .total_cmp(&b.0.unwrap_or(f64::NEG_INFINITY))
                .then(a.1.cmp(&b.1))
        });
        groups.dedup();
        for (value, method) in groups {
            let members: Vec<&EvaluationRow> = rows
                .iter()
                .filter(|r| r.method == method && r.param_value == value)
                .collect();
            let lat: Vec<f64> = members.iter().filter_map(|r| r.realized_latency).collect();
            let energy: Vec<f64> = members.iter().filter_map(|r| r.dynamic_energy).collect();
            let (mean_latency, std_latency) = mean_std(&lat);
            let (mean_dynamic_energy, std_dynamic_energy) = mean_std(&energy);
            aggregates.push(Aggregate {
                method,
                param_name: members[0].param_name.clone(),
                param_value: value,
                runs: members.len(),
                feasible_runs: members.iter().filter(|r| r.feasible).count(),
                mean_latency,
                std_latency,
                mean_dynamic_energy,
                std_dynamic_energy,
                budget_violations: members.iter().map(|r| r.budget_violations).sum(),
            });
        }
        let mut values: Vec<Option<f64>> = aggregates.iter().map(|a| a.param_value).collect();
        values.dedup();
        let headlines = values
            .into_iter()
            .map(|value| {
                let find = |m| aggregates.iter().find(|a| a.method == m && a.param_value == value);
                let (dro, dob, rob) = (find(Method::Dro), find(Method::Do), find(Method::Ro));
                let pct = |base: Option<f64>, ours: Option<f64>| match (base, ours) {
                    (Some(b), Some(o)) if b != 0.0 => Some(100.0 * (b - o) / b),
                    _ => None,
                };
                Headline {
                    param_value: value,
                    latency_reduction_vs_do_pct: pct(
                        dob.and_then(|a| a.mean_latency),
                        dro.and_then(|a| a.mean_latency),
                    ),
                    energy_saving_vs_ro_pct: pct(
                        rob.and_then(|a| a.mean_dynamic_energy),
                        dro.and_then(|a| a.mean_dynamic_energy),
                    ),
                }
            })
            .collect();
        Self {
            rows,
            aggregates,
            headlines,
        }
    }

    pub fn aggregate(&self, method: Method, param_value: Option<f64>) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.param_value == param_value)
    }

    /// Writes the per-row CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvaluationError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "seed",
            "param_name",
            "param_value",
            "realized_latency_s",
            "max_uav_energy_J",
            "hap_energy_J",
            "feasible",
        ])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.as_str().to_string(),
                r.seed.to_string(),
                r.param_name.clone(),
                cell(r.param_value),
                cell(r.realized_latency),
                cell(r.max_uav_energy()),
                cell(r.hap_energy),
                r.feasible.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, EvaluationError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Aggregates and headline percentages as pretty JSON.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            aggregates: &'a [Aggregate],
            headlines: &'a [Headline],
        }
        serde_json::to_string_pretty(&Summary {
            aggregates: &self.aggregates,
            headlines: &self.headlines,
        })
        .expect("summary serializes")
    }
}

/// Inputs every method sees for one seed.
#[derive(Debug, Clone)]
pub struct SeedInstance {
    pub scenario: Scenario,
    pub histories: Vec<HistoryLog>,
    pub sets: Vec<AmbiguitySet>,
    pub realization: Realization,
}

/// Scenario, histories, ambiguity sets and realization for one seed.
pub fn build_instance(config: &ExperimentConfig, seed: u64) -> Result<SeedInstance, EvaluationError> {
    let scenario = generate_scenario(&config.scenario, seed)?;
    let ni = scenario.num_tds();
    let histories = if config.per_device_history {
        (0..ni)
            .map(|i| generate_history_indexed(&config.truth, &config.space, config.history_len, seed, i as u64))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![generate_history(&config.truth, &config.space, config.history_len, seed)?]
    };
    let radius = config.radius.resolve(config.space.len(), config.history_len)?;
    let shared: Vec<AmbiguitySet> = histories
        .iter()
        .map(|h| {
            AmbiguitySet::new(
                config.space.clone(),
                empirical_distribution(h, &config.space)?,
                radius,
            )
        })
        .collect::<Result<_, _>>()?;
    let sets = if config.per_device_history {
        shared
    } else {
        vec![shared[0].clone(); ni]
    };
    let realization = draw_realization(&config.truth, &config.space, ni, seed)?;
    Ok(SeedInstance {
        scenario,
        histories,
        sets,
        realization,
    })
}

/// Plans with `method` on a prepared instance.
pub fn solve_method(
    method: Method,
    instance: &SeedInstance,
    space: &SampleSpace,
) -> Result<SolveResult, SolveError> {
    let s = &instance.scenario;
    match method {
        Method::Dro => mdrloa_solve(s, &instance.sets),
        Method::Do => baseline_deterministic(s, space.mean_atom(), Method::Do),
        Method::Ro => baseline_deterministic(s, space.max_atom(), Method::Ro),
        Method::Exhaustive => exhaustive_solve(s, &worst_case_means(&instance.sets)),
    }
}

fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    param_name: &str,
    param_value: Option<f64>,
) -> Result<Vec<EvaluationRow>, EvaluationError> {
    let instance = build_instance(config, seed)?;
    let mut rows = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let mut row = EvaluationRow {
            method,
            seed,
            param_name: param_name.to_string(),
            param_value,
            feasible: false,
            realized_latency: None,
            uav_energy: Vec::new(),
            hap_energy: None,
            dynamic_energy: None,
            budget_violations: 0,
            planned_latency: None,
            lp_solve_count: 0,
            error: None,
            decision: None,
        };
        match solve_method(method, &instance, &config.space) {
            Ok(result) => {
                let lat = realized_latency(&result.decision, &instance.scenario, &instance.realization)?;
                let e = realized_energy(&result.decision, &instance.scenario, &instance.realization)?;
                row.feasible = true;
                row.realized_latency = Some(lat);
                row.dynamic_energy = Some(e.energy.dynamic_total(&instance.scenario));
                row.hap_energy = Some(e.energy.hap);
                row.uav_energy = e.energy.uav;
                row.budget_violations = e.violations;
                row.planned_latency = Some(result.planned_latency);
                row.lp_solve_count = result.lp_solve_count;
                row.decision = Some(result.decision);
            }
            Err(err) => row.error = Some(err.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

fn with_pool<T: Send>(
    jobs: usize,
    work: impl FnOnce() -> T + Send,
) -> Result<T, EvaluationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvaluationError::ThreadPool(e.to_string()))?;
    Ok(pool.install(work))
}

fn run_grid(
    configs: &[(ExperimentConfig, Option<f64>)],
    param_name: &str,
    seeds: &[u64],
    jobs: usize,
) -> Result<EvaluationReport, EvaluationError> {
    if seeds.is_empty() {
        return Err(EvaluationError::NoSeeds);
    }
    let work: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let chunks = with_pool(jobs, || {
        work.par_iter()
            .map(|&(c, seed)| run_seed(&configs[c].0, seed, param_name, configs[c].1))
            .collect::<Result<Vec<_>, _>>()
    })??;
    Ok(EvaluationReport::from_rows(chunks.into_iter().flatten().collect()))
}

/// Every configured method on every seed.
pub fn compare_methods(
    config: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<EvaluationReport, EvaluationError> {
    run_grid(&[(config.clone(), None)], "none", seeds, jobs)
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// History length; the radius follows from the configured confidence
    /// when the config specifies one.
    HistoryLen,
    /// Fixed L1 radius.
    Tolerance,
    QuotaHap,
    QuotaUav,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::HistoryLen => "Q",
            SweepParam::Tolerance => "eps",
            SweepParam::QuotaHap => "quota-hap",
            SweepParam::QuotaUav => "quota-uav",
        }
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, EvaluationError> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value.is_finite() {
                Ok(value as usize)
            } else {
                Err(EvaluationError::InvalidSweep(format!(
                    "{} takes non-negative integers, got {value}",
                    self.name()
                )))
            }
        };
        let mut c = config.clone();
        match self {
            SweepParam::HistoryLen => {
                c.history_len = count()?;
                if c.history_len == 0 {
                    return Err(EvaluationError::InvalidSweep("Q must be >= 1".into()));
                }
            }
            SweepParam::Tolerance => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(EvaluationError::InvalidSweep(format!("eps must be >= 0, got {value}")));
                }
                c.radius = RadiusSpec::Tolerance(value);
            }
            SweepParam::QuotaHap => c.scenario.quota_hap = count()?,
            SweepParam::QuotaUav => c.scenario.quota_uav = count()?,
        }
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Q" | "q" => Ok(SweepParam::HistoryLen),
            "eps" | "epsilon" => Ok(SweepParam::Tolerance),
            "quota-hap" | "N_H" => Ok(SweepParam::QuotaHap),
            "quota-uav" | "N_u" => Ok(SweepParam::QuotaUav),
            other => Err(format!(
                "unknown sweep parameter '{other}' (expected Q, eps, quota-hap or quota-uav)"
            )),
        }
    }
}

/// [`compare_methods`] once per value of `param`, all else held fixed.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    jobs: usize,
) -> Result<EvaluationReport, EvaluationError> {
    if values.is_empty() {
        return Err(EvaluationError::InvalidSweep("no values given".into()));
    }
    let configs = values
        .iter()
        .map(|&v| Ok((param.apply(config, v)?, Some(v))))
        .collect::<Result<Vec<_>, EvaluationError>>()?;
    run_grid(&configs, param.name(), seeds, jobs)
}
