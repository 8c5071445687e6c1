//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use aan_offload::ambiguity::{AmbiguitySet, Distribution, SampleSpace};
use aan_offload::geometry::{generate_scenario, Scenario, ScenarioConfig};
use aan_offload::lp::{check_solution, LinearProgram, LpSolution, SolverOptions};
use aan_offload::model::OffloadDecision;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MBIT: f64 = 1e6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference_space() -> SampleSpace {
    SampleSpace::from_atoms([3.0, 9.0, 15.0, 21.0, 27.0].map(|a| a * MBIT).to_vec()).unwrap()
}

/// Instance whose link rates are drawn directly rather than from geometry,
/// tuned so that relaying to the HAP competes with computing on the UAV and
/// the energy budgets bind on a good share of draws.
pub fn stress_instance(seed: u64, num_tds: usize, num_uavs: usize) -> (Scenario, Vec<f64>) {
    let mut r = rng(seed ^ 0x5eed_5eed);
    let quota_uav = r.gen_range(num_tds.div_ceil(num_uavs).max(1)..=num_tds);
    let mut s = generate_scenario(
        &ScenarioConfig {
            num_tds,
            num_uavs,
            quota_uav,
            quota_hap: r.gen_range(0..=num_tds),
            ..ScenarioConfig::default()
        },
        seed,
    )
    .unwrap();
    for row in s.rate_td_uav.iter_mut() {
        for v in row.iter_mut() {
            *v = r.gen_range(1e6..1e7);
        }
    }
    for v in s.rate_uav_hap.iter_mut() {
        *v = r.gen_range(5e6..5e8);
    }
    let means: Vec<f64> = (0..num_tds).map(|_| r.gen_range(3.0..27.0) * MBIT).collect();
    s.energy.uav_budget = r.gen_range(5.0..40.0);
    s.energy.hap_budget = r.gen_range(5e3..4e4);
    (s, means)
}

/// Uniformly random point of the probability simplex of dimension `k`.
pub fn random_simplex_point(r: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -r.gen_range(1e-12..1.0f64).ln()).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

/// Random distribution inside `set`: a random direction from the reference,
/// scaled back onto the L1 ball when it leaves it.
pub fn random_member(r: &mut ChaCha8Rng, set: &AmbiguitySet) -> Distribution {
    let p0 = set.reference.probs();
    let q = random_simplex_point(r, p0.len());
    let dist: f64 = q.iter().zip(p0).map(|(a, b)| (a - b).abs()).sum();
    let scale = if dist > set.radius { r.gen_range(0.0..1.0) * set.radius / dist } else { 1.0 };
    let p: Vec<f64> = p0.iter().zip(&q).map(|(b, a)| b + scale * (a - b)).collect();
    Distribution::new(p).unwrap()
}

/// Random structurally valid decision, or `None` when the draw breaks a
/// quota.
pub fn random_decision(r: &mut ChaCha8Rng, s: &Scenario) -> Option<OffloadDecision> {
    let (ni, nj) = (s.num_tds(), s.num_uavs());
    let access: Vec<usize> = (0..ni).map(|_| r.gen_range(0..nj)).collect();
    let on_uav: Vec<bool> = (0..ni).map(|_| r.gen_bool(0.5)).collect();
    let d = OffloadDecision::from_routes(nj, &access, &on_uav);
    d.validate_structure(s).ok().map(|_| d)
}

/// Every structurally valid decision of a small instance.
pub fn all_decisions(s: &Scenario) -> Vec<OffloadDecision> {
    let (ni, nj) = (s.num_tds(), s.num_uavs());
    let mut out = Vec::new();
    for code in 0..nj.pow(ni as u32) {
        let mut c = code;
        let access: Vec<usize> = (0..ni)
            .map(|_| {
                let a = c % nj;
                c /= nj;
                a
            })
            .collect();
        for split in 0u32..(1 << ni) {
            let on_uav: Vec<bool> = (0..ni).map(|i| split >> i & 1 == 1).collect();
            let d = OffloadDecision::from_routes(nj, &access, &on_uav);
            if d.validate_structure(s).is_ok() {
                out.push(d);
            }
        }
    }
    out
}

/// Re-certifies an optimal solution at the acceptance thresholds.
pub fn certified(lp: &LinearProgram, sol: &LpSolution) -> bool {
    let rep = check_solution(lp, sol);
    let opts = SolverOptions::default();
    rep.primal <= 1e-8
        && rep.dual <= 1e-8
        && rep.complementarity <= 1e-8
        && rep.gap <= 1e-7
        && rep.passes(&opts)
}

/// Largest expected latency over a simplex grid of step `h`, per device,
/// restricted to the ambiguity ball. Latency is separable in the devices,
/// so the per-device grid maxima add up to the joint grid maximum.
pub fn grid_max_latency(sets: &[AmbiguitySet], coeff: &[f64], h: f64) -> f64 {
    let steps = (1.0 / h).round() as usize;
    sets.iter()
        .zip(coeff)
        .map(|(set, &c)| {
            let atoms = set.space.atoms();
            let mut best = f64::NEG_INFINITY;
            for a in 0..=steps {
                for b in 0..=steps - a {
                    let p = [a as f64 * h, b as f64 * h, (steps - a - b) as f64 * h];
                    let d: f64 = p.iter().zip(set.reference.probs()).map(|(x, y)| (x - y).abs()).sum();
                    if d <= set.radius + 1e-12 {
                        let mean: f64 = p.iter().zip(atoms).map(|(x, y)| x * y).sum();
                        best = best.max(c * mean);
                    }
                }
            }
            best
        })
        .sum()
}

pub mod lp_fuzz;
