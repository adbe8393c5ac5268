use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use selfcorrect::config::{Command, Format, RunConfig};
use selfcorrect::harness::{self, Criterion, SweepPoint};
use selfcorrect::output::{self, CRITICAL_HEADER};
use selfcorrect::{
    aggregate, measure, steady_state_time, trajectory_rng, Error, Event, FieldUpdate, InitMode,
    RatesConfig, TorusGeometry, Trajectory,
};

/// Toric-code memory stabilized by a cellular-automaton field.
#[derive(Debug, Parser)]
#[command(name = "selfcorrect", version, allow_negative_numbers = true)]
struct Cli {
    /// trajectory | ensemble | threshold | phasediagram | selftest
    command: Option<Command>,
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Lattice sizes.
    #[arg(short = 'L', long = "size", value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Pair-creation rates (a bisection grid for threshold runs).
    #[arg(long, value_delimiter = ',')]
    gamma1: Vec<f64>,
    /// Hop rate; all rates are in units of it by convention.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Field-update rates.
    #[arg(long, value_delimiter = ',')]
    gamma3: Vec<f64>,
    /// Trajectories per ensemble.
    #[arg(short = 'N')]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Steady-state prefactor in t_max = c L^4 / gamma1.
    #[arg(short = 'c')]
    c: Option<f64>,
    /// sync | async
    #[arg(long)]
    field_update: Option<FieldUpdate>,
    /// ground | mixed
    #[arg(long)]
    init: Option<InitMode>,
    /// p_eps | depth_var
    #[arg(long)]
    criterion: Option<Criterion>,
    /// Floor on Var(d)/L^2 for the depth_var criterion.
    #[arg(long)]
    depth_var_floor: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// csv | jsonl
    #[arg(long)]
    format: Option<Format>,
    /// Log-spaced measurement times before t_max.
    #[arg(long)]
    grid: Option<usize>,
    /// Event trace of a single trajectory (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final field of a single trajectory as little-endian f64.
    #[arg(long)]
    field_dump: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Skip points whose estimated event count exceeds this.
    #[arg(long)]
    budget: Option<f64>,
}

impl Cli {
    fn resolve(self) -> selfcorrect::Result<(RunConfig, bool)> {
        let table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::config("config", e.message().to_string()))?
            }
            None => toml::Table::new(),
        };
        let from_file = match table.get("command") {
            Some(v) => Some(
                v.as_str()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::config("command", format!("unknown command {v}")))?,
            ),
            None => None,
        };
        let command = self
            .command
            .or(from_file)
            .ok_or_else(|| Error::config("command", "no command given"))?;
        let mut cfg = RunConfig::new(command);
        if command == Command::Selftest {
            cfg.gamma1 = vec![0.05];
        }
        cfg.apply_table(&table)?;
        cfg.command = command;

        if !self.sizes.is_empty() {
            cfg.sizes = self.sizes;
        }
        if !self.gamma1.is_empty() {
            cfg.gamma1 = self.gamma1;
        }
        if !self.gamma3.is_empty() {
            cfg.gamma3 = self.gamma3;
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),+ $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })+
            };
        }
        set!(gamma2 => gamma2, trajectories => trajectories, c => c,
            field_update => field_update, init => init, criterion => criterion,
            depth_var_floor => depth_var_floor, format => format, grid => grid_points);
        macro_rules! set_opt {
            ($($flag:ident => $field:ident),+ $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$field = Some(v); })+
            };
        }
        set_opt!(seed => seed, output => output, trace => trace, field_dump => field_dump,
            workers => workers, budget => event_budget);
        cfg.validate()?;
        Ok((cfg, self.print_config))
    }
}

fn rates(cfg: &RunConfig, gamma1: f64, gamma3: f64) -> selfcorrect::Result<RatesConfig> {
    RatesConfig::new(gamma1, cfg.gamma2, gamma3)
}

fn single<T: Copy>(key: &str, xs: &[T]) -> selfcorrect::Result<T> {
    match xs {
        [x] => Ok(*x),
        _ => Err(Error::config(key, "trajectory runs take a single value")),
    }
}

fn create(path: &Path) -> selfcorrect::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_trace(path: &Path, traj: &mut Trajectory) -> selfcorrect::Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = create(path)?;
    writeln!(out, "t,event,a,b,c").map_err(io_err)?;
    for rec in traj.take_trace() {
        let (a, b, c) = match rec.event {
            Event::PairCreation { edge } => (edge as u64, None, None),
            Event::Hop { from, to, edge } => (from as u64, Some(to as u64), Some(edge as u64)),
            Event::FieldSweep { count } => (count, None, None),
            Event::SiteUpdate { plaquette } => (plaquette as u64, None, None),
        };
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{:.16e},{},{a},{},{}",
            rec.time,
            rec.event.kind(),
            opt(b),
            opt(c)
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn run_single(cfg: &RunConfig) -> selfcorrect::Result<Vec<SweepPoint>> {
    let size = single("L", &cfg.sizes)?;
    let r = rates(
        cfg,
        single("gamma1", &cfg.gamma1)?,
        single("gamma3", &cfg.gamma3)?,
    )?;
    let geo = Arc::new(TorusGeometry::new(size)?);
    let seed = cfg.seed.unwrap_or(0);
    let mut traj = Trajectory::new(geo, r, cfg.field_update, cfg.init, trajectory_rng(seed, 0));
    if cfg.trace.is_some() {
        traj.enable_trace();
    }
    let t_max = steady_state_time(size, r, cfg.c);
    let grid = harness::measurement_grid(t_max, cfg.grid_points);
    let mut ms = Vec::with_capacity(grid.len());
    traj.run_until(t_max, &grid, |_, s| ms.push(measure(s, 0)));
    if let Some(path) = &cfg.trace {
        write_trace(path, &mut traj)?;
    }
    if let Some(path) = &cfg.field_dump {
        let mut out = create(path)?;
        let io_err = |source| Error::Io {
            path: path.clone(),
            source,
        };
        traj.field.write_dump(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    Ok(vec![SweepPoint {
        size,
        rates: r,
        t_max,
        series: aggregate(&ms, size, seed),
        trajectories: 1,
        failed_trajectories: 0,
        complete: true,
        skipped: false,
        estimated_events: 0.0,
        wall_seconds: 0.0,
    }])
}

fn report(point: &SweepPoint) {
    if point.skipped {
        eprintln!(
            "L={} gamma1={} gamma3={}: skipped, estimated {:.3e} events",
            point.size, point.rates.gamma1, point.rates.gamma3, point.estimated_events
        );
    } else if !point.complete {
        eprintln!(
            "L={} gamma1={} gamma3={}: {} of {} trajectories failed",
            point.size,
            point.rates.gamma1,
            point.rates.gamma3,
            point.failed_trajectories,
            point.trajectories
        );
    }
}

fn run_grid(cfg: &RunConfig) -> selfcorrect::Result<Vec<SweepPoint>> {
    let plan = cfg.plan();
    let mut points = Vec::new();
    for &size in &cfg.sizes {
        for &g3 in &cfg.gamma3 {
            for &g1 in &cfg.gamma1 {
                let p = harness::run_ensemble(&plan, size, rates(cfg, g1, g3)?)?;
                report(&p);
                points.push(p);
            }
        }
    }
    Ok(points)
}

fn run_critical(cfg: &RunConfig) -> selfcorrect::Result<Vec<SweepPoint>> {
    let plan = cfg.plan();
    let bisection = cfg.bisection();
    let mut gamma3 = cfg.gamma3.clone();
    gamma3.sort_by(f64::total_cmp);
    let mut points = Vec::new();
    let mut table = vec![CRITICAL_HEADER.to_string()];
    for g3 in gamma3 {
        let mut probe =
            harness::EnsembleProbe::new(&plan, (cfg.sizes[0], cfg.sizes[1]), g3, cfg.criterion);
        probe.depth_var_floor = cfg.depth_var_floor;
        let est = harness::locate_critical(&mut probe, &bisection)?;
        table.push(output::critical_line(g3, &est, cfg.criterion));
        points.extend(probe.points);
    }
    for line in table {
        println!("{line}");
    }
    Ok(points)
}

/// Half-decade ladder upward from the configured `c`.
fn run_selftest(cfg: &RunConfig) -> selfcorrect::Result<(Vec<SweepPoint>, bool)> {
    let mut plan = cfg.plan();
    plan.master_seed = cfg.seed.unwrap_or(0);
    let r = rates(cfg, cfg.gamma1[0], cfg.gamma3[0])?;
    let ladder: Vec<f64> = (0..5).map(|k| cfg.c * 10f64.powf(k as f64 / 2.0)).collect();
    let mut last = None;
    for &c in &ladder {
        plan.steady_c = c;
        let p = harness::run_ensemble(&plan, cfg.sizes[0], r)?;
        let ok = harness::is_saturated(&p);
        eprintln!(
            "c={c}: p_eps {}",
            if ok { "saturated" } else { "not saturated" }
        );
        if ok {
            return Ok((vec![p], true));
        }
        last = Some(p);
    }
    Ok((last.into_iter().collect(), false))
}

fn run(cfg: &RunConfig) -> selfcorrect::Result<bool> {
    let (points, ok) = match cfg.command {
        Command::Trajectory => (run_single(cfg)?, true),
        Command::Ensemble => (run_grid(cfg)?, true),
        Command::Threshold | Command::Phasediagram => {
            let points = run_critical(cfg)?;
            if cfg.output.is_none() {
                return Ok(true);
            }
            (points, true)
        }
        Command::Selftest => run_selftest(cfg)?,
    };
    let rows = output::rows(&points, cfg.seed.unwrap_or(0));
    output::emit(&rows, cfg.format, cfg.output.as_deref())?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, print) = match cli.resolve() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if print {
        print!("{cfg}");
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
