//! Per-trajectory measurements and their ensemble statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{decode, logical_bits};
use crate::dynamics::Trajectory;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub time: f64,
    pub trajectory: u64,
    /// Anyon count over `L^2`.
    pub anyon_density: f64,
    /// Circuit depth `d` of the clustering decoder.
    pub depth: usize,
    /// `d / L^2`.
    pub depth_normalized: f64,
    pub logical: (bool, bool),
}

impl Measurement {
    pub fn has_logical_error(&self) -> bool {
        self.logical.0 || self.logical.1
    }
}

/// Measures the current state of a trajectory without touching it.
pub fn measure(traj: &Trajectory, trajectory: u64) -> Measurement {
    let geo = traj.geometry();
    let l2 = geo.plaquette_count() as f64;
    let result = decode(&traj.frame, geo);
    Measurement {
        time: traj.time(),
        trajectory,
        anyon_density: traj.frame.anyon_count() as f64 / l2,
        depth: result.depth,
        depth_normalized: result.depth as f64 / l2,
        logical: logical_bits(&traj.frame, &result, geo),
    }
}

/// Mean, unbiased variance and bootstrap statistics of the sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub variance: Option<f64>,
    /// Bootstrap standard deviation of the mean.
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub time: f64,
    pub count: usize,
    /// Fewer than two samples: variances are undefined.
    pub flagged: bool,
    /// Anyon density `n`.
    pub density: Summary,
    /// Normalized depth `d / L^2`.
    pub depth: Summary,
    /// `Var(d) / L^2`.
    pub depth_variance: Option<f64>,
    /// Fraction of trajectories with either logical bit set.
    pub p_eps: Summary,
}

impl EnsembleStats {
    pub fn density_variance(&self) -> Option<f64> {
        self.density.variance
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile bootstrap of several observables sharing the resample indices.
fn bootstrap<const K: usize>(columns: [&[f64]; K], seed: u64) -> [Summary; K] {
    let n = columns[0].len();
    let means: [f64; K] = std::array::from_fn(|k| mean(columns[k]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(BOOTSTRAP_RESAMPLES));
    let mut acc = [0.0f64; K];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            for k in 0..K {
                acc[k] += columns[k][i];
            }
        }
        for k in 0..K {
            draws[k].push(acc[k] / n as f64);
        }
    }
    std::array::from_fn(|k| {
        let d = &mut draws[k];
        let se = sample_variance(d).unwrap_or(0.0).sqrt();
        d.sort_by(f64::total_cmp);
        // percentile bounds can miss the mean by rounding; clamp so the
        // interval always brackets it
        let lo = percentile(d, 0.025).min(means[k]);
        let hi = percentile(d, 0.975).max(means[k]);
        Summary {
            mean: means[k],
            variance: sample_variance(columns[k]),
            std_error: se,
            ci_lo: lo,
            ci_hi: hi,
        }
    })
}

/// Groups measurements by time and summarizes each group. The result does
/// not depend on the order of `measurements`.
pub fn aggregate(measurements: &[Measurement], size: usize, seed: u64) -> Vec<EnsembleStats> {
    let mut sorted: Vec<Measurement> = measurements.to_vec();
    sorted.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.trajectory.cmp(&b.trajectory))
            .then(a.anyon_density.total_cmp(&b.anyon_density))
            .then(a.depth.cmp(&b.depth))
            .then(a.logical.cmp(&b.logical))
    });
    let l2 = (size * size) as f64;
    sorted
        .chunk_by(|a, b| a.time == b.time)
        .enumerate()
        .map(|(gi, group)| {
            let density: Vec<f64> = group.iter().map(|m| m.anyon_density).collect();
            let depth: Vec<f64> = group.iter().map(|m| m.depth_normalized).collect();
            let raw_depth: Vec<f64> = group.iter().map(|m| m.depth as f64).collect();
            let fails: Vec<f64> = group
                .iter()
                .map(|m| if m.has_logical_error() { 1.0 } else { 0.0 })
                .collect();
            let group_seed = seed ^ (gi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let [density, depth, p_eps] = bootstrap([&density, &depth, &fails], group_seed);
            EnsembleStats {
                time: group[0].time,
                count: group.len(),
                flagged: group.len() < 2,
                density,
                depth,
                depth_variance: sample_variance(&raw_depth).map(|v| v / l2),
                p_eps,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, Normal};

    use crate::dynamics::{trajectory_rng, RatesConfig};
    use crate::field::FieldUpdate;
    use crate::frame::InitMode;
    use crate::lattice::TorusGeometry;

    fn m(time: f64, id: u64, n: f64, d: usize, fail: bool) -> Measurement {
        Measurement {
            time,
            trajectory: id,
            anyon_density: n,
            depth: d,
            depth_normalized: d as f64 / 16.0,
            logical: (fail, false),
        }
    }

    fn traj(l: usize, init: InitMode, seed: u64) -> Trajectory {
        Trajectory::new(
            Arc::new(TorusGeometry::new(l).unwrap()),
            RatesConfig::new(0.01, 1.0, 10.0).unwrap(),
            FieldUpdate::Sync,
            init,
            trajectory_rng(seed, 0),
        )
    }

    #[test]
    fn ground_state_measures_zero() {
        let t = traj(6, InitMode::Ground, 0);
        let got = measure(&t, 0);
        assert_eq!(got.anyon_density, 0.0);
        assert_eq!(got.depth_normalized, 0.0);
        assert_eq!(got.logical, (false, false));
    }

    #[test]
    fn one_pair_density() {
        let mut t = traj(8, InitMode::Ground, 0);
        let geo = t.geometry().clone();
        t.frame.apply_flip(&geo, 5);
        let before = t.frame.clone();
        let got = measure(&t, 0);
        assert_eq!(got.anyon_density, 2.0 / 64.0);
        assert_eq!(got.depth, 1);
        assert_eq!(t.frame, before);
    }

    #[test]
    fn mixed_initial_density_is_one_half() {
        let xs: Vec<f64> = (0..1000)
            .map(|s| measure(&traj(8, InitMode::Mixed, s), 0).anyon_density)
            .collect();
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let sigma = (0.25 / 64.0 / 1000.0f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn identical_samples_have_zero_spread() {
        let ms: Vec<_> = (0..10).map(|i| m(1.0, i, 0.25, 3, false)).collect();
        let s = &aggregate(&ms, 4, 0)[0];
        assert_eq!(s.density.variance, Some(0.0));
        assert_eq!(s.density.ci_lo, s.density.ci_hi);
        assert_eq!(s.depth_variance, Some(0.0));
        assert_eq!(s.p_eps.mean, 0.0);
    }

    #[test]
    fn logical_error_fraction() {
        let ms = vec![
            m(1.0, 0, 0.0, 0, true),
            m(1.0, 1, 0.0, 0, true),
            m(1.0, 2, 0.0, 0, false),
            m(1.0, 3, 0.0, 0, false),
        ];
        let s = &aggregate(&ms, 4, 0)[0];
        assert_eq!(s.p_eps.mean, 0.5);
        assert!(s.p_eps.ci_lo <= 0.5 && 0.5 <= s.p_eps.ci_hi);
    }

    #[test]
    fn singletons_are_flagged() {
        let s = aggregate(&[m(1.0, 0, 0.5, 1, false)], 4, 0);
        assert!(s[0].flagged);
        assert_eq!(s[0].density.variance, None);
        assert_eq!(s[0].depth_variance, None);
    }

    #[test]
    fn groups_by_time_and_ignores_order() {
        let mut ms = Vec::new();
        for i in 0..30 {
            ms.push(m(1.0, i, i as f64 / 30.0, (i % 4) as usize, i % 3 == 0));
            ms.push(m(2.0, i, 0.5, 2, i % 2 == 0));
        }
        let a = aggregate(&ms, 4, 9);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].time, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        ms.shuffle(&mut rng);
        assert_eq!(aggregate(&ms, 4, 9), a);
    }

    #[test]
    fn gaussian_variance_and_ci_coverage() {
        let normal = Normal::new(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let v = sample_variance(&xs).unwrap();
        assert!((v - 4.0).abs() < 0.2, "{v}");

        // coverage of the bootstrap interval for the mean
        let reps = 1000;
        let mut covered = 0;
        for r in 0..reps {
            let ys: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
            let [s] = bootstrap([&ys], r as u64);
            if s.ci_lo <= 1.0 && 1.0 <= s.ci_hi {
                covered += 1;
            }
        }
        assert!(covered >= 930, "coverage {covered}/{reps}");
    }
}
