//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use selfcorrect::harness::{calibrate_steady_c, ExperimentPlan};
use selfcorrect::observables::Summary;
use selfcorrect::{RatesConfig, TorusGeometry};

/// Minimum-weight correction classes for an anyon pair, by breadth-first
/// search on the four-fold cover of the torus. A state is a plaquette and
/// the winding parities of the path walked so far. Returns the path length
/// and every parity pair reached at that length.
pub fn min_weight_classes(geo: &TorusGeometry, a: usize, b: usize) -> (usize, Vec<(bool, bool)>) {
    let n = geo.plaquette_count();
    let idx = |p: usize, m: u8| p * 4 + m as usize;
    let mut dist = vec![usize::MAX; 4 * n];
    let mut queue = VecDeque::new();
    dist[idx(a, 0)] = 0;
    queue.push_back((a, 0u8));
    while let Some((p, m)) = queue.pop_front() {
        let d = dist[idx(p, m)];
        for (slot, q) in geo.neighbors(p).into_iter().enumerate() {
            let e = geo.edge_towards(p, slot);
            let m2 = m ^ geo.cut_mask(e);
            if dist[idx(q, m2)] == usize::MAX {
                dist[idx(q, m2)] = d + 1;
                queue.push_back((q, m2));
            }
        }
    }
    let best = (0..4u8).map(|m| dist[idx(b, m)]).min().unwrap();
    let classes = (0..4u8)
        .filter(|&m| dist[idx(b, m)] == best)
        .map(|m| (m & 1 != 0, m & 2 != 0))
        .collect();
    (best, classes)
}

/// One line per acceptance criterion, easy to grep from test output.
pub fn verdict(id: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "criterion {id}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

/// Mean difference in units of the combined bootstrap standard error.
pub fn z_score(a: &Summary, b: &Summary) -> f64 {
    let se = a.std_error.hypot(b.std_error);
    if se == 0.0 {
        if a.mean == b.mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.mean - b.mean).abs() / se
    }
}

/// Ladder for the steady-state prefactor, lowest first. Values below 1
/// keep the slow suite within a single-machine budget.
pub const C_LADDER: [f64; 5] = [0.01, 0.03, 0.1, 0.3, 1.0];

/// Smallest ladder value for which `p_eps(t)` at `L = 8`, `gamma1 = 0.05`
/// has saturated by the end of the horizon.
pub fn calibrated_c(seed: u64) -> f64 {
    let plan = ExperimentPlan {
        trajectories: 200,
        master_seed: seed,
        ..ExperimentPlan::default()
    };
    let rates = RatesConfig::new(0.05, 1.0, 10.0).unwrap();
    let (c, point) = calibrate_steady_c(&plan, 8, rates, &C_LADDER)
        .unwrap()
        .expect("no ladder value saturates");
    let n = point.series.len();
    println!(
        "steady-state prefactor c = {c} (p_eps {:.3} -> {:.3} over the last grid step)",
        point.series[n - 2].p_eps.mean,
        point.series[n - 1].p_eps.mean
    );
    c
}
