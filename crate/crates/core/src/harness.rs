//! Ensemble runs, threshold location and the field-rate phase diagram.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{trajectory_rng, RatesConfig, Trajectory};
use crate::error::{Error, Result};
use crate::field::FieldUpdate;
use crate::frame::InitMode;
use crate::lattice::TorusGeometry;
use crate::observables::{aggregate, measure, EnsembleStats, Measurement};

/// Everything needed to run ensembles reproducibly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub sizes: Vec<usize>,
    pub trajectories: usize,
    /// Prefactor `c` of the steady-state horizon `c L^4 / gamma1`.
    pub steady_c: f64,
    pub master_seed: u64,
    /// Log-spaced measurement times before `t_max`.
    pub grid_points: usize,
    pub field_update: FieldUpdate,
    pub init: InitMode,
    /// Skip points whose estimated event count exceeds this.
    pub event_budget: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16],
            trajectories: 200,
            steady_c: 1.0,
            master_seed: 0,
            grid_points: 32,
            field_update: FieldUpdate::Sync,
            init: InitMode::Ground,
            event_budget: None,
            workers: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 2 {
            return Err(Error::config(
                "trajectories",
                "need at least 2 trajectories",
            ));
        }
        if !(self.steady_c > 0.0 && self.steady_c.is_finite()) {
            return Err(Error::config("c", "steady-state constant must be positive"));
        }
        if let Some(&l) = self.sizes.iter().find(|&&l| l < 3) {
            return Err(Error::config(
                "L",
                format!("lattice size must be >= 3, got {l}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: usize,
    pub rates: RatesConfig,
    pub t_max: f64,
    /// Statistics per measurement time, ascending; the last entry is at
    /// `t_max`.
    pub series: Vec<EnsembleStats>,
    pub trajectories: usize,
    pub failed_trajectories: usize,
    pub complete: bool,
    /// Set when the resource guard refused to run the point.
    pub skipped: bool,
    pub estimated_events: f64,
    pub wall_seconds: f64,
}

impl SweepPoint {
    pub fn steady(&self) -> Option<&EnsembleStats> {
        self.series.last()
    }
}

/// Horizon `c L^4 / gamma1` on which logical errors appear under diffusive
/// anyon motion. Falls back to `c L^4 / gamma2` without errors.
pub fn steady_state_time(size: usize, rates: RatesConfig, c: f64) -> f64 {
    let l4 = (size as f64).powi(4);
    if rates.gamma1 > 0.0 {
        c * l4 / rates.gamma1
    } else if rates.gamma2 > 0.0 {
        c * l4 / rates.gamma2
    } else {
        c * l4
    }
}

/// `points` log-spaced times over the four decades below `t_max`, then
/// `t_max` itself.
pub fn measurement_grid(t_max: f64, points: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..points)
        .map(|i| t_max * 10f64.powf(-4.0 * (1.0 - i as f64 / points as f64)))
        .collect();
    grid.push(t_max);
    grid
}

pub fn estimated_events(
    size: usize,
    rates: RatesConfig,
    mode: FieldUpdate,
    t_max: f64,
    n: usize,
) -> f64 {
    let l2 = (size * size) as f64;
    let field = match mode {
        FieldUpdate::Sync => rates.gamma3,
        FieldUpdate::Async => rates.gamma3 * l2,
    };
    (rates.gamma1 * 2.0 * l2 + field) * t_max * n as f64
}

/// Runs one trajectory and measures it on `grid`.
pub fn run_trajectory(
    geo: &Arc<TorusGeometry>,
    rates: RatesConfig,
    plan: &ExperimentPlan,
    index: u64,
    grid: &[f64],
) -> Vec<Measurement> {
    let rng = trajectory_rng(plan.master_seed, index);
    let mut traj = Trajectory::new(geo.clone(), rates, plan.field_update, plan.init, rng);
    let mut out = Vec::with_capacity(grid.len());
    let t_max = grid.last().copied().unwrap_or(0.0);
    traj.run_until(t_max, grid, |_, state| out.push(measure(state, index)));
    out
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Runs `plan.trajectories` independent trajectories to the steady-state
/// horizon and aggregates their measurements. Trajectory `i` always uses
/// stream `i` of the master seed, so results do not depend on the number of
/// workers.
pub fn run_ensemble(plan: &ExperimentPlan, size: usize, rates: RatesConfig) -> Result<SweepPoint> {
    plan.validate()?;
    let geo = Arc::new(TorusGeometry::new(size)?);
    let t_max = steady_state_time(size, rates, plan.steady_c);
    let estimate = estimated_events(size, rates, plan.field_update, t_max, plan.trajectories);
    let mut point = SweepPoint {
        size,
        rates,
        t_max,
        series: Vec::new(),
        trajectories: plan.trajectories,
        failed_trajectories: 0,
        complete: false,
        skipped: false,
        estimated_events: estimate,
        wall_seconds: 0.0,
    };
    if plan.event_budget.is_some_and(|b| estimate > b) {
        point.skipped = true;
        return Ok(point);
    }
    let start = Instant::now();
    let grid = measurement_grid(t_max, plan.grid_points);
    let results: Vec<Option<Vec<Measurement>>> = with_pool(plan.workers, || {
        (0..plan.trajectories as u64)
            .into_par_iter()
            .map(|i| {
                catch_unwind(AssertUnwindSafe(|| {
                    run_trajectory(&geo, rates, plan, i, &grid)
                }))
                .ok()
            })
            .collect()
    });
    let failed = results.iter().filter(|r| r.is_none()).count();
    let measurements: Vec<Measurement> = results.into_iter().flatten().flatten().collect();
    point.series = aggregate(&measurements, size, plan.master_seed);
    point.failed_trajectories = failed;
    point.complete = failed == 0;
    point.wall_seconds = start.elapsed().as_secs_f64();
    Ok(point)
}

/// Which signal defines the transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Sign change of `p_eps(L_large) - p_eps(L_small)`.
    #[default]
    PEps,
    /// First rate where `Var(d)/L^2` at the larger size exceeds a floor.
    DepthVar,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::PEps => "p_eps",
            Criterion::DepthVar => "depth_var",
        }
    }
}

/// Signed indicator at one rate: negative on the self-correcting side,
/// positive on the trivial side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeValue {
    pub value: f64,
    pub std_error: f64,
}

impl ProbeValue {
    fn is_above(&self) -> bool {
        self.value > 0.0
    }

    fn consistent_with_zero(&self) -> bool {
        self.value.abs() <= 1.96 * self.std_error
    }
}

/// Anything that can evaluate the crossing indicator at a given `gamma1`.
pub trait CrossingProbe {
    fn evaluate(&mut self, gamma1: f64) -> Result<ProbeValue>;
}

impl<F: FnMut(f64) -> Result<ProbeValue>> CrossingProbe for F {
    fn evaluate(&mut self, gamma1: f64) -> Result<ProbeValue> {
        self(gamma1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub gamma1_c: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// No sign change on the grid; `gamma1_c` is the grid boundary.
    pub censored: bool,
    /// Bracket after each bisection step.
    pub brackets: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionConfig {
    /// Initial `gamma1` grid, ascending.
    pub grid: Vec<f64>,
    /// Stop once `hi / lo` drops below this ratio.
    pub ratio: f64,
    pub max_steps: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            grid: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
            ratio: 1.3,
            max_steps: 12,
        }
    }
}

/// Bisection in `log gamma1` for the sign change of the probe.
pub fn locate_critical<P: CrossingProbe>(
    probe: &mut P,
    config: &BisectionConfig,
) -> Result<CriticalEstimate> {
    let grid = &config.grid;
    if grid.is_empty() {
        return Err(Error::config("grid", "empty gamma1 grid"));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut bracket = None;
    for (i, &g) in grid.iter().enumerate() {
        let v = probe.evaluate(g)?;
        values.push(v);
        if i > 0 && !values[i - 1].is_above() && v.is_above() {
            bracket = Some((i - 1, i));
            break;
        }
    }
    let Some((i_lo, i_hi)) = bracket else {
        let all_above = values.iter().all(|v| v.is_above());
        let edge = if all_above {
            grid[0]
        } else {
            *grid.last().unwrap()
        };
        return Ok(CriticalEstimate {
            gamma1_c: edge,
            ci_lo: edge,
            ci_hi: edge,
            censored: true,
            brackets: Vec::new(),
        });
    };
    let (mut lo, mut hi) = (grid[i_lo], grid[i_hi]);
    let (mut v_lo, mut v_hi) = (values[i_lo], values[i_hi]);
    let mut brackets = vec![(lo, hi)];
    for _ in 0..config.max_steps {
        if hi / lo < config.ratio || (v_lo.consistent_with_zero() && v_hi.consistent_with_zero()) {
            break;
        }
        let mid = (lo * hi).sqrt();
        let v = probe.evaluate(mid)?;
        if v.is_above() {
            hi = mid;
            v_hi = v;
        } else {
            lo = mid;
            v_lo = v;
        }
        brackets.push((lo, hi));
    }
    Ok(CriticalEstimate {
        gamma1_c: (lo * hi).sqrt(),
        ci_lo: lo,
        ci_hi: hi,
        censored: false,
        brackets,
    })
}

/// Crossing probe backed by simulated ensembles. Every evaluated point is
/// kept for output.
pub struct EnsembleProbe<'a> {
    pub plan: &'a ExperimentPlan,
    pub sizes: (usize, usize),
    pub gamma2: f64,
    pub gamma3: f64,
    pub criterion: Criterion,
    pub depth_var_floor: f64,
    pub points: Vec<SweepPoint>,
}

impl<'a> EnsembleProbe<'a> {
    pub fn new(
        plan: &'a ExperimentPlan,
        sizes: (usize, usize),
        gamma3: f64,
        criterion: Criterion,
    ) -> Self {
        Self {
            plan,
            sizes,
            gamma2: 1.0,
            gamma3,
            criterion,
            depth_var_floor: 1e-3,
            points: Vec::new(),
        }
    }
}

impl CrossingProbe for EnsembleProbe<'_> {
    fn evaluate(&mut self, gamma1: f64) -> Result<ProbeValue> {
        let rates = RatesConfig::new(gamma1, self.gamma2, self.gamma3)?;
        match self.criterion {
            Criterion::PEps => {
                let small = run_ensemble(self.plan, self.sizes.0, rates)?;
                let large = run_ensemble(self.plan, self.sizes.1, rates)?;
                let (s, l) = match (small.steady(), large.steady()) {
                    (Some(s), Some(l)) => (s.p_eps, l.p_eps),
                    _ => {
                        return Err(Error::OverBudget(
                            small.estimated_events.max(large.estimated_events),
                        ))
                    }
                };
                self.points.push(small);
                self.points.push(large);
                Ok(ProbeValue {
                    value: l.mean - s.mean,
                    std_error: s.std_error.hypot(l.std_error),
                })
            }
            Criterion::DepthVar => {
                let large = run_ensemble(self.plan, self.sizes.1, rates)?;
                let var = large
                    .steady()
                    .and_then(|s| s.depth_variance)
                    .ok_or(Error::OverBudget(large.estimated_events))?;
                self.points.push(large);
                Ok(ProbeValue {
                    value: var - self.depth_var_floor,
                    std_error: 0.0,
                })
            }
        }
    }
}

/// Critical `gamma1` at field rate `gamma3` from the size pair `sizes`,
/// together with every ensemble evaluated on the way.
pub fn locate_critical_gamma1(
    plan: &ExperimentPlan,
    gamma3: f64,
    sizes: (usize, usize),
    criterion: Criterion,
    config: &BisectionConfig,
) -> Result<(CriticalEstimate, Vec<SweepPoint>)> {
    if sizes.0 >= sizes.1 {
        return Err(Error::config("L", "size pair must be increasing"));
    }
    let mut probe = EnsembleProbe::new(plan, sizes, gamma3, criterion);
    let estimate = locate_critical(&mut probe, config)?;
    Ok((estimate, probe.points))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub gamma3: f64,
    pub estimate: CriticalEstimate,
}

/// Critical `gamma1` for each field-update rate, ordered by `gamma3`.
pub fn phase_diagram<P, F>(
    gamma3_list: &[f64],
    mut make_probe: F,
    config: &BisectionConfig,
) -> Result<Vec<PhaseRow>>
where
    P: CrossingProbe,
    F: FnMut(f64) -> P,
{
    if gamma3_list.is_empty() {
        return Err(Error::config("gamma3", "empty gamma3 list"));
    }
    let mut sorted = gamma3_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|g3| {
            let mut probe = make_probe(g3);
            locate_critical(&mut probe, config).map(|estimate| PhaseRow {
                gamma3: g3,
                estimate,
            })
        })
        .collect()
}

/// Saturation check on the last two grid points of a time series: `p_eps`
/// must change by less than two combined bootstrap standard errors.
pub fn is_saturated(point: &SweepPoint) -> bool {
    let n = point.series.len();
    if n < 2 {
        return false;
    }
    let (a, b) = (&point.series[n - 2].p_eps, &point.series[n - 1].p_eps);
    (b.mean - a.mean).abs() < 2.0 * a.std_error.hypot(b.std_error).max(f64::EPSILON)
}

/// Smallest `c` from `ladder` whose horizon saturates `p_eps` at the given
/// point; `None` if none does.
pub fn calibrate_steady_c(
    plan: &ExperimentPlan,
    size: usize,
    rates: RatesConfig,
    ladder: &[f64],
) -> Result<Option<(f64, SweepPoint)>> {
    for &c in ladder {
        let p = ExperimentPlan {
            steady_c: c,
            ..plan.clone()
        };
        let point = run_ensemble(&p, size, rates)?;
        if is_saturated(&point) {
            return Ok(Some((c, point)));
        }
    }
    Ok(None)
}
