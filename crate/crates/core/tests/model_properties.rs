mod common;

use aan_offload::ambiguity::{AmbiguitySet, Distribution, SampleSpace};
use aan_offload::lp::{solve_lp, LpStatus};
use aan_offload::mdrloa::{dive_and_fix, exhaustive_solve, mdrloa_solve, Method, SolveError};
use aan_offload::model::{
    build_p2, build_p3, expected_latency, task_means, worst_case_distributions, worst_case_means,
};
use common::*;
use rand::Rng;

/// Stress instances whose relaxation is feasible.
fn feasible_instances(count: usize, tds: std::ops::RangeInclusive<usize>, uavs: std::ops::RangeInclusive<usize>, base: u64) -> Vec<(u64, aan_offload::geometry::Scenario, Vec<f64>)> {
    let mut out = Vec::new();
    let mut seed = base;
    while out.len() < count {
        let mut r = rng(seed);
        let (ni, nj) = (r.gen_range(tds.clone()), r.gen_range(uavs.clone()));
        let (s, means) = stress_instance(seed, ni, nj);
        let (lp, _) = build_p2(&s, &means).unwrap();
        if solve_lp(&lp).unwrap().status == LpStatus::Optimal {
            out.push((seed, s, means));
        }
        seed += 1;
    }
    out
}

#[test]
fn relaxation_bounds_every_integral_decision() {
    for (seed, s, means) in feasible_instances(25, 1..=4, 2..=2, 100) {
        let (lp, _) = build_p2(&s, &means).unwrap();
        let bound = solve_lp(&lp).unwrap().objective;
        for d in all_decisions(&s) {
            if d.validate(&s, &means).is_ok() {
                let lat = expected_latency(&d, &s, &means).unwrap();
                assert!(bound <= lat * (1.0 + 1e-9), "seed {seed}: bound {bound} > {lat}");
            }
        }
    }
}

#[test]
fn strong_duality_on_random_instances() {
    for (seed, s, means) in feasible_instances(50, 2..=6, 2..=3, 500) {
        let (p2, _) = build_p2(&s, &means).unwrap();
        let (p3, layout) = build_p3(&s, &means).unwrap();
        let primal = solve_lp(&p2).unwrap();
        let dual = solve_lp(&p3).unwrap();
        assert_eq!(dual.status, LpStatus::Optimal, "seed {seed}");
        assert!(certified(&p2, &primal) && certified(&p3, &dual), "seed {seed}");
        let gap = (primal.objective - dual.objective).abs() / primal.objective.abs().max(1.0);
        assert!(gap <= 1e-6, "seed {seed}: {} vs {}", primal.objective, dual.objective);
        for j in 0..s.num_uavs() {
            assert!(dual.primal[layout.uav_quota(j)] >= -1e-9);
            assert!(dual.primal[layout.uav_energy(j)] >= -1e-9);
        }
        assert!(dual.primal[layout.hap_quota()] >= -1e-9);
        assert!(dual.primal[layout.hap_energy()] >= -1e-9);
    }
}

#[test]
fn infeasible_relaxation_has_unbounded_dual() {
    let (mut s, means) = stress_instance(3, 4, 2);
    s.quota_uav = 1;
    let (p2, _) = build_p2(&s, &means).unwrap();
    assert_eq!(solve_lp(&p2).unwrap().status, LpStatus::Infeasible);
    let (p3, _) = build_p3(&s, &means).unwrap();
    assert_eq!(solve_lp(&p3).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn worst_case_dominates_random_members() {
    let space = reference_space();
    let mut r = rng(77);
    let (s, _) = stress_instance(77, 6, 3);
    let sets: Vec<AmbiguitySet> = (0..6)
        .map(|_| AmbiguitySet::new(space.clone(), Distribution::new(random_simplex_point(&mut r, 5)).unwrap(), r.gen_range(0.0..0.8)).unwrap())
        .collect();
    let worst = task_means(&worst_case_distributions(&sets), &space);
    assert_eq!(worst, worst_case_means(&sets));
    let mut checked = 0;
    while checked < 20 {
        let Some(d) = random_decision(&mut r, &s) else { continue };
        checked += 1;
        let top = expected_latency(&d, &s, &worst).unwrap();
        for _ in 0..100 {
            let dists: Vec<Distribution> = sets.iter().map(|set| random_member(&mut r, set)).collect();
            assert!(dists.iter().zip(&sets).all(|(p, set)| set.contains(p)));
            let lat = expected_latency(&d, &s, &task_means(&dists, &space)).unwrap();
            assert!(lat <= top * (1.0 + 1e-12));
        }
    }
}

#[test]
fn decomposition_matches_simplex_grid() {
    let space = SampleSpace::from_atoms(vec![5.0 * MBIT, 12.0 * MBIT, 20.0 * MBIT]).unwrap();
    let h = 0.02;
    for eps in [0.1f64, 0.3] {
        let mut r = rng((eps * 1000.0) as u64);
        let (s, _) = stress_instance(eps.to_bits(), 4, 2);
        let sets: Vec<AmbiguitySet> = (0..4)
            .map(|_| {
                // references on the grid so that the ball's centre is a grid point
                let a = r.gen_range(0..=50usize);
                let b = r.gen_range(0..=50 - a);
                let p = vec![a as f64 * h, b as f64 * h, (50 - a - b) as f64 * h];
                AmbiguitySet::new(space.clone(), Distribution::new(p).unwrap(), eps).unwrap()
            })
            .collect();
        let worst = worst_case_means(&sets);
        let mut checked = 0;
        while checked < 10 {
            let Some(d) = random_decision(&mut r, &s) else { continue };
            checked += 1;
            let coeff: Vec<f64> = (0..4)
                .map(|i| {
                    let mut unit = vec![0.0; 4];
                    unit[i] = 1.0;
                    expected_latency(&d, &s, &unit).unwrap()
                })
                .collect();
            let exact = expected_latency(&d, &s, &worst).unwrap();
            let grid = grid_max_latency(&sets, &coeff, h);
            // moving one grid step of mass changes each mean by at most h * (range of atoms)
            let lipschitz: f64 = coeff.iter().map(|c| c * h * (20.0 - 5.0) * MBIT).sum();
            assert!(grid <= exact * (1.0 + 1e-12), "grid {grid} above decomposition {exact}");
            assert!(exact - grid <= lipschitz, "gap {} exceeds {lipschitz}", exact - grid);
        }
    }
}

#[test]
fn dive_respects_oracle_and_bounds() {
    for (seed, s, means) in feasible_instances(30, 2..=4, 2..=2, 900) {
        let best = match exhaustive_solve(&s, &means) {
            Ok(b) => b,
            Err(SolveError::Infeasible(_)) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        match dive_and_fix(&s, &means, Method::Do) {
            Ok(r) => {
                r.decision.validate(&s, &means).unwrap();
                assert!(r.relaxation_bound <= best.planned_latency * (1.0 + 1e-9));
                assert!(best.planned_latency <= r.planned_latency * (1.0 + 1e-9));
                assert!(r.planned_latency >= r.relaxation_bound - 1e-6);
                for w in r.dive_objectives.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed}: dive decreased");
                }
            }
            Err(SolveError::Backtrack { .. }) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn lp_count_within_fractional_bound() {
    let mut dives = 0;
    for (seed, s, means) in feasible_instances(40, 2..=8, 2..=3, 1300) {
        let Ok(r) = dive_and_fix(&s, &means, Method::Do) else { continue };
        dives += 1;
        // count fractional root entries independently of the dive
        let (root, layout) = build_p2(&s, &means).unwrap();
        let sol = solve_lp(&root).unwrap();
        let fx = (0..s.num_tds())
            .flat_map(|i| (0..s.num_uavs()).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let v = sol.primal[layout.x_var(i, j)];
                v.min(1.0 - v) > 1e-6
            })
            .count();
        assert_eq!(fx, r.fractional_x_root, "seed {seed}");
        assert!(
            r.lp_solve_count <= 2 * fx + 2 * r.fractional_y_after_x + 2,
            "seed {seed}: {} solves, {fx} + {} fractional",
            r.lp_solve_count,
            r.fractional_y_after_x
        );
    }
    assert!(dives >= 30);
}

#[test]
fn robust_plan_on_worst_case_sets() {
    let space = reference_space();
    let (s, _) = stress_instance(5, 5, 2);
    let sets = vec![AmbiguitySet::new(space, Distribution::uniform(5), 0.3).unwrap(); 5];
    if let Ok(r) = mdrloa_solve(&s, &sets) {
        assert!(r.planning_means.iter().all(|&m| (m - 18.6e6).abs() < 1e-3));
        r.decision.validate(&s, &r.planning_means).unwrap();
    }
}
