//! L1-ball ambiguity sets over a discrete task-size sample space.
//!
//! A device's reference distribution is the histogram of its historical task
//! sizes over the sample-space bins. The ambiguity set is every distribution
//! on the same atoms within L1 distance `radius` of that reference.

use std::fmt::Write as _;

use rand::distributions::{Distribution as _, WeightedIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation, Sense};
use crate::rng::{stream_rng_indexed, Stream};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbiguityError {
    #[error("invalid sample space: {0}")]
    InvalidSpace(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("sample {sample} bits lies outside every bin")]
    SampleOutOfRange { sample: u64 },
    #[error("size mismatch: {left} vs {right} atoms")]
    Shape { left: usize, right: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("history is empty")]
    EmptyHistory,
    #[error("cannot parse history line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Task-size atoms (bits, strictly increasing) and the bin edges that map
/// observed sizes onto them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    atoms: Vec<f64>,
    edges: Vec<f64>,
}

impl SampleSpace {
    /// Bins split halfway between consecutive atoms; the first bin starts at
    /// zero and the last is unbounded above.
    pub fn from_atoms(atoms: Vec<f64>) -> Result<Self, AmbiguityError> {
        if atoms.is_empty() {
            return Err(AmbiguityError::InvalidSpace("no atoms".into()));
        }
        let mut edges = Vec::with_capacity(atoms.len() + 1);
        edges.push(0.0);
        edges.extend(atoms.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(f64::INFINITY);
        Self::with_edges(atoms, edges)
    }

    pub fn with_edges(atoms: Vec<f64>, edges: Vec<f64>) -> Result<Self, AmbiguityError> {
        if atoms.is_empty() {
            return Err(AmbiguityError::InvalidSpace("no atoms".into()));
        }
        if edges.len() != atoms.len() + 1 {
            return Err(AmbiguityError::InvalidSpace(format!(
                "{} atoms need {} edges, got {}",
                atoms.len(),
                atoms.len() + 1,
                edges.len()
            )));
        }
        if atoms.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(AmbiguityError::InvalidSpace("atoms must be finite and >= 0".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AmbiguityError::InvalidSpace("atoms must be strictly increasing".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) || edges[0].is_nan() {
            return Err(AmbiguityError::InvalidSpace("edges must be strictly increasing".into()));
        }
        for (k, a) in atoms.iter().enumerate() {
            if !(edges[k] <= *a && *a < edges[k + 1]) {
                return Err(AmbiguityError::InvalidSpace(format!(
                    "atom {a} is not inside its bin [{}, {})",
                    edges[k],
                    edges[k + 1]
                )));
            }
        }
        Ok(Self { atoms, edges })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Index `k` with `edges[k] <= value < edges[k + 1]`.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        if !(value >= self.edges[0]) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= value);
        (k >= 1 && k <= self.atoms.len()).then(|| k - 1)
    }

    pub fn mean_atom(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().expect("non-empty")
    }
}

/// Probabilities over the atoms of a [`SampleSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, AmbiguityError> {
        if probs.is_empty() {
            return Err(AmbiguityError::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(AmbiguityError::InvalidDistribution(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(AmbiguityError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expected task size in bits.
    pub fn mean(&self, space: &SampleSpace) -> f64 {
        self.probs.iter().zip(space.atoms()).map(|(p, a)| p * a).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySet {
    pub space: SampleSpace,
    pub reference: Distribution,
    pub radius: f64,
}

impl AmbiguitySet {
    pub fn new(space: SampleSpace, reference: Distribution, radius: f64) -> Result<Self, AmbiguityError> {
        if reference.len() != space.len() {
            return Err(AmbiguityError::Shape {
                left: reference.len(),
                right: space.len(),
            });
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(AmbiguityError::Domain(format!("radius must be >= 0, got {radius}")));
        }
        Ok(Self {
            space,
            reference,
            radius,
        })
    }

    /// Whether `p` lies in the set, up to `1e-9` on both constraints.
    pub fn contains(&self, p: &Distribution) -> bool {
        p.len() == self.space.len()
            && l1_distance(p, &self.reference).is_ok_and(|d| d <= self.radius + PROB_TOL)
    }
}

/// Observed task sizes in bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryLog {
    samples: Vec<u64>,
}

impl HistoryLog {
    pub fn new(samples: Vec<u64>) -> Result<Self, AmbiguityError> {
        if samples.is_empty() {
            return Err(AmbiguityError::EmptyHistory);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One integer sample per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 9);
        for s in &self.samples {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output; blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self, AmbiguityError> {
        let mut samples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = line.parse::<u64>().map_err(|e| AmbiguityError::Parse {
                line: n + 1,
                reason: e.to_string(),
            })?;
            samples.push(v);
        }
        Self::new(samples)
    }
}

/// Histogram of `history` over the bins of `space`, normalized by Q.
pub fn empirical_distribution(
    history: &HistoryLog,
    space: &SampleSpace,
) -> Result<Distribution, AmbiguityError> {
    let mut counts = vec![0_u64; space.len()];
    for &s in history.samples() {
        let k = space
            .bin_of(s as f64)
            .ok_or(AmbiguityError::SampleOutOfRange { sample: s })?;
        counts[k] += 1;
    }
    let q = history.len() as f64;
    Distribution::new(counts.iter().map(|&c| c as f64 / q).collect())
}

pub fn l1_distance(a: &Distribution, b: &Distribution) -> Result<f64, AmbiguityError> {
    if a.len() != b.len() {
        return Err(AmbiguityError::Shape {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).sum())
}

/// L1 radius that holds with probability `confidence` for a histogram of
/// `q` samples over `k` atoms: `(k / 2q) ln(2k / (1 - confidence))`.
pub fn tolerance_from_confidence(k: usize, q: usize, confidence: f64) -> Result<f64, AmbiguityError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(AmbiguityError::Domain(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    if k == 0 || q == 0 {
        return Err(AmbiguityError::Domain("atom and sample counts must be >= 1".into()));
    }
    let (k, q) = (k as f64, q as f64);
    Ok(k / (2.0 * q) * (2.0 * k / (1.0 - confidence)).ln())
}

/// Inverse of [`tolerance_from_confidence`]: `1 - 2k exp(-2 q eps / k)`.
pub fn confidence_from_tolerance(k: usize, q: usize, tolerance: f64) -> f64 {
    let (k, q) = (k as f64, q as f64);
    1.0 - 2.0 * k * (-2.0 * q * tolerance / k).exp()
}

/// Distribution in `set` with the largest mean, and that mean.
///
/// Moving mass `t` from anywhere to the top atom costs `2t` of L1 budget and
/// gains the most when taken from the smallest atoms, so the maximizer shifts
/// `min(radius / 2, 1 - p_top)` from the bottom of the distribution upward.
pub fn worst_case_mean_distribution(set: &AmbiguitySet) -> (Distribution, f64) {
    let mut p = set.reference.probs().to_vec();
    let top = p.len() - 1;
    let shift = (0.5 * set.radius).min(1.0 - p[top]).max(0.0);
    if top > 0 && shift > 0.0 {
        let mut remaining = shift;
        for pk in p.iter_mut().take(top) {
            let take = pk.min(remaining);
            *pk -= take;
            remaining -= take;
            if remaining <= 0.0 {
                break;
            }
        }
        p[top] += shift - remaining;
    }
    let dist = Distribution { probs: p };
    let mean = dist.mean(&set.space);
    (dist, mean)
}

/// The same maximum computed as a linear program over `(p, t)` with
/// `|p_k - p0_k| <= t_k` and `sum t <= radius`. Used as an independent check.
pub fn worst_case_mean_by_lp(set: &AmbiguitySet) -> Result<f64, LpError> {
    let k = set.space.len();
    let p0 = set.reference.probs();
    let mut objective = set.space.atoms().to_vec();
    objective.extend(std::iter::repeat_n(0.0, k));
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    let mut row = vec![0.0; 2 * k];
    row[..k].fill(1.0);
    lp.add_constraint(row, Relation::Eq, 1.0, "simplex");
    for i in 0..k {
        let mut up = vec![0.0; 2 * k];
        up[i] = 1.0;
        up[k + i] = -1.0;
        lp.add_constraint(up, Relation::Le, p0[i], format!("dev_up_{i}"));
        let mut down = vec![0.0; 2 * k];
        down[i] = -1.0;
        down[k + i] = -1.0;
        lp.add_constraint(down, Relation::Le, -p0[i], format!("dev_down_{i}"));
    }
    let mut budget = vec![0.0; 2 * k];
    budget[k..].fill(1.0);
    lp.add_constraint(budget, Relation::Le, set.radius, "radius");
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        status => Err(LpError::Numerical {
            message: format!("inner maximization returned {status:?}"),
            report: None,
        }),
    }
}

/// `q` independent draws of atom values under `truth`.
pub fn generate_history(
    truth: &Distribution,
    space: &SampleSpace,
    q: usize,
    seed: u64,
) -> Result<HistoryLog, AmbiguityError> {
    generate_history_indexed(truth, space, q, seed, 0)
}

/// As [`generate_history`], drawing from sub-stream `index` (one per device
/// when histories are not shared).
pub fn generate_history_indexed(
    truth: &Distribution,
    space: &SampleSpace,
    q: usize,
    seed: u64,
    index: u64,
) -> Result<HistoryLog, AmbiguityError> {
    if q == 0 {
        return Err(AmbiguityError::EmptyHistory);
    }
    if truth.len() != space.len() {
        return Err(AmbiguityError::Shape {
            left: truth.len(),
            right: space.len(),
        });
    }
    let mut rng = stream_rng_indexed(seed, Stream::History, index);
    let picker = WeightedIndex::new(truth.probs())
        .map_err(|e| AmbiguityError::InvalidDistribution(e.to_string()))?;
    let samples = (0..q)
        .map(|_| space.atoms()[picker.sample(&mut rng)].round() as u64)
        .collect();
    HistoryLog::new(samples)
}
