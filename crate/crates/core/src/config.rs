//! Run configuration: defaults, config-file keys and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::field::FieldUpdate;
use crate::frame::InitMode;
use crate::harness::{BisectionConfig, Criterion, ExperimentPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Trajectory,
    Ensemble,
    Threshold,
    Phasediagram,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

macro_rules! keyword_enum {
    ($ty:ty, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
    };
}

keyword_enum!(Command,
    "trajectory" => Command::Trajectory,
    "ensemble" => Command::Ensemble,
    "threshold" => Command::Threshold,
    "phasediagram" => Command::Phasediagram,
    "selftest" => Command::Selftest,
);
keyword_enum!(Format, "csv" => Format::Csv, "jsonl" => Format::Jsonl);
keyword_enum!(FieldUpdate, "sync" => FieldUpdate::Sync, "async" => FieldUpdate::Async);
keyword_enum!(InitMode, "ground" => InitMode::Ground, "mixed" => InitMode::Mixed);
keyword_enum!(Criterion, "p_eps" => Criterion::PEps, "depth_var" => Criterion::DepthVar);

fn keyword<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("keyword enums serialize to strings"),
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub sizes: Vec<usize>,
    pub gamma1: Vec<f64>,
    pub gamma2: f64,
    pub gamma3: Vec<f64>,
    pub trajectories: usize,
    pub seed: Option<u64>,
    pub c: f64,
    pub field_update: FieldUpdate,
    pub init: InitMode,
    pub criterion: Criterion,
    pub depth_var_floor: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub grid_points: usize,
    pub trace: Option<PathBuf>,
    pub field_dump: Option<PathBuf>,
    pub workers: Option<usize>,
    pub event_budget: Option<f64>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            sizes: vec![8],
            gamma1: vec![0.01],
            gamma2: 1.0,
            gamma3: vec![10.0],
            trajectories: 200,
            seed: None,
            c: 1.0,
            field_update: FieldUpdate::Sync,
            init: InitMode::Ground,
            criterion: Criterion::PEps,
            depth_var_floor: 1e-3,
            output: None,
            format: Format::Csv,
            grid_points: 32,
            trace: None,
            field_dump: None,
            workers: None,
            event_budget: None,
        }
    }

    /// Every key accepted in a config file, in canonical order.
    pub const KEYS: [&'static str; 19] = [
        "command",
        "L",
        "gamma1",
        "gamma2",
        "gamma3",
        "N",
        "seed",
        "c",
        "field_update",
        "init",
        "criterion",
        "depth_var_floor",
        "output",
        "format",
        "grid",
        "trace",
        "field_dump",
        "workers",
        "budget",
    ];

    /// Applies the keys of a parsed config file on top of `self`.
    pub fn apply_table(&mut self, table: &Table) -> Result<()> {
        for (key, value) in table {
            let k = key.as_str();
            match k {
                "command" => self.command = keyword_value(k, value)?,
                "L" => self.sizes = list(k, value, unsigned)?,
                "gamma1" => self.gamma1 = list(k, value, float)?,
                "gamma2" => self.gamma2 = float(k, value)?,
                "gamma3" => self.gamma3 = list(k, value, float)?,
                "N" => self.trajectories = unsigned(k, value)?,
                "seed" => self.seed = Some(unsigned(k, value)? as u64),
                "c" => self.c = float(k, value)?,
                "field_update" => self.field_update = keyword_value(k, value)?,
                "init" => self.init = keyword_value(k, value)?,
                "criterion" => self.criterion = keyword_value(k, value)?,
                "depth_var_floor" => self.depth_var_floor = float(k, value)?,
                "output" => self.output = Some(path(k, value)?),
                "format" => self.format = keyword_value(k, value)?,
                "grid" => self.grid_points = unsigned(k, value)?,
                "trace" => self.trace = Some(path(k, value)?),
                "field_dump" => self.field_dump = Some(path(k, value)?),
                "workers" => self.workers = Some(unsigned(k, value)?),
                "budget" => self.event_budget = Some(float(k, value)?),
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, file: &Path) -> Result<()> {
        let text = std::fs::read_to_string(file).map_err(|source| Error::Io {
            path: file.to_path_buf(),
            source,
        })?;
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        self.apply_table(&table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::config("L", "at least one lattice size is required"));
        }
        if let Some(&l) = self.sizes.iter().find(|&&l| l < 3) {
            return Err(Error::config(
                "L",
                format!("lattice size must be >= 3, got {l}"),
            ));
        }
        nonnegative_list("gamma1", &self.gamma1)?;
        nonnegative("gamma2", self.gamma2)?;
        nonnegative_list("gamma3", &self.gamma3)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(
                "c",
                format!("must be positive, got {}", self.c),
            ));
        }
        nonnegative("depth_var_floor", self.depth_var_floor)?;
        if let Some(b) = self.event_budget {
            nonnegative("budget", b)?;
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.seed.is_some_and(|s| s > i64::MAX as u64) {
            return Err(Error::config("seed", "must fit in a signed 64-bit integer"));
        }
        if self.seed.is_none() && self.command != Command::Selftest {
            return Err(Error::config("seed", "a master seed is required"));
        }
        let min_n = if self.command == Command::Trajectory {
            1
        } else {
            2
        };
        if self.trajectories < min_n {
            return Err(Error::config(
                "N",
                format!("need at least {min_n} trajectories"),
            ));
        }
        match self.command {
            Command::Threshold | Command::Phasediagram => {
                if self.sizes.len() != 2 || self.sizes[0] >= self.sizes[1] {
                    return Err(Error::config("L", "needs an increasing size pair"));
                }
                if self.gamma1.windows(2).any(|w| w[0] >= w[1])
                    || self.gamma1.iter().any(|&g| g <= 0.0)
                {
                    return Err(Error::config(
                        "gamma1",
                        "bisection grid must be positive and ascending",
                    ));
                }
                if self.command == Command::Threshold && self.gamma3.len() != 1 {
                    return Err(Error::config("gamma3", "threshold takes a single value"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            sizes: self.sizes.clone(),
            trajectories: self.trajectories,
            steady_c: self.c,
            master_seed: self.seed.unwrap_or(0),
            grid_points: self.grid_points,
            field_update: self.field_update,
            init: self.init,
            event_budget: self.event_budget,
            workers: self.workers,
        }
    }

    pub fn bisection(&self) -> BisectionConfig {
        BisectionConfig {
            grid: self.gamma1.clone(),
            ..BisectionConfig::default()
        }
    }

    /// Canonical key-value form; parsing it back yields `self`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        let floats = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::Float(x)).collect());
        t.insert("command".into(), Value::String(keyword(&self.command)));
        t.insert(
            "L".into(),
            Value::Array(
                self.sizes
                    .iter()
                    .map(|&l| Value::Integer(l as i64))
                    .collect(),
            ),
        );
        t.insert("gamma1".into(), floats(&self.gamma1));
        t.insert("gamma2".into(), Value::Float(self.gamma2));
        t.insert("gamma3".into(), floats(&self.gamma3));
        t.insert("N".into(), Value::Integer(self.trajectories as i64));
        if let Some(s) = self.seed {
            t.insert("seed".into(), Value::Integer(s as i64));
        }
        t.insert("c".into(), Value::Float(self.c));
        t.insert(
            "field_update".into(),
            Value::String(keyword(&self.field_update)),
        );
        t.insert("init".into(), Value::String(keyword(&self.init)));
        t.insert(
            "criterion".into(),
            Value::String(self.criterion.label().into()),
        );
        t.insert("depth_var_floor".into(), Value::Float(self.depth_var_floor));
        if let Some(p) = &self.output {
            t.insert("output".into(), Value::String(p.display().to_string()));
        }
        t.insert("format".into(), Value::String(keyword(&self.format)));
        t.insert("grid".into(), Value::Integer(self.grid_points as i64));
        if let Some(p) = &self.trace {
            t.insert("trace".into(), Value::String(p.display().to_string()));
        }
        if let Some(p) = &self.field_dump {
            t.insert("field_dump".into(), Value::String(p.display().to_string()));
        }
        if let Some(w) = self.workers {
            t.insert("workers".into(), Value::Integer(w as i64));
        }
        if let Some(b) = self.event_budget {
            t.insert("budget".into(), Value::Float(b));
        }
        t
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keys in canonical order rather than the table's sorted order
        let table = self.to_table();
        for key in Self::KEYS {
            if let Some(v) = table.get(key) {
                writeln!(f, "{key} = {v}")?;
            }
        }
        Ok(())
    }
}

fn nonnegative(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be finite and nonnegative, got {x}"),
        ))
    }
}

fn nonnegative_list(key: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::config(key, "at least one value is required"));
    }
    xs.iter().try_for_each(|&x| nonnegative(key, x))
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, format!("expected a number, got {v}"))),
    }
}

fn unsigned(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(
            key,
            format!("expected a nonnegative integer, got {v}"),
        )),
    }
}

fn path(key: &str, v: &Value) -> Result<PathBuf> {
    v.as_str()
        .map(PathBuf::from)
        .ok_or_else(|| Error::config(key, format!("expected a path string, got {v}")))
}

fn keyword_value<T: FromStr<Err = String>>(key: &str, v: &Value) -> Result<T> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))?;
    s.parse().map_err(|e| Error::config(key, e))
}

/// A scalar or an array of scalars.
fn list<T>(key: &str, v: &Value, item: fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    match v {
        Value::Array(xs) => xs.iter().map(|x| item(key, x)).collect(),
        _ => Ok(vec![item(key, v)?]),
    }
}
