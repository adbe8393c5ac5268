//! CSV and JSON-lines sinks for ensemble statistics.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::error::{Error, Result};
use crate::harness::{Criterion, CriticalEstimate, SweepPoint};
use crate::observables::EnsembleStats;

pub const CSV_HEADER: &str =
    "t,L,gamma1,gamma2,gamma3,n,n_var,d_norm,d_var,p_eps,p_eps_ci_lo,p_eps_ci_hi,N,seed";

/// One emitted record: an ensemble summary at one measurement time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    #[serde(rename = "L")]
    pub size: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub n: f64,
    pub n_var: Option<f64>,
    pub d_norm: f64,
    pub d_var: Option<f64>,
    pub p_eps: f64,
    pub p_eps_ci_lo: f64,
    pub p_eps_ci_hi: f64,
    #[serde(rename = "N")]
    pub count: usize,
    pub seed: u64,
}

impl Row {
    pub fn new(point: &SweepPoint, stats: &EnsembleStats, seed: u64) -> Self {
        Self {
            t: stats.time,
            size: point.size,
            gamma1: point.rates.gamma1,
            gamma2: point.rates.gamma2,
            gamma3: point.rates.gamma3,
            n: stats.density.mean,
            n_var: stats.density.variance,
            d_norm: stats.depth.mean,
            d_var: stats.depth_variance,
            p_eps: stats.p_eps.mean,
            p_eps_ci_lo: stats.p_eps.ci_lo,
            p_eps_ci_hi: stats.p_eps.ci_hi,
            count: stats.count,
            seed,
        }
    }

    fn csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(self.t),
            self.size,
            num(self.gamma1),
            num(self.gamma2),
            num(self.gamma3),
            num(self.n),
            opt(self.n_var),
            num(self.d_norm),
            opt(self.d_var),
            num(self.p_eps),
            num(self.p_eps_ci_lo),
            num(self.p_eps_ci_hi),
            self.count,
            self.seed
        )
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Every time point of every sweep point, in order.
pub fn rows(points: &[SweepPoint], seed: u64) -> Vec<Row> {
    points
        .iter()
        .flat_map(|p| p.series.iter().map(move |s| Row::new(p, s, seed)))
        .collect()
}

pub fn write_rows<W: Write>(rows: &[Row], format: Format, mut out: W) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(out, "{}", r.csv_line())?;
            }
        }
        Format::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()
}

/// Writes `rows` to `path`, or to stdout when no path is given.
pub fn emit(rows: &[Row], format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let io_err = |source| Error::Io {
                path: p.to_path_buf(),
                source,
            };
            let file = File::create(p).map_err(io_err)?;
            write_rows(rows, format, BufWriter::new(file)).map_err(io_err)
        }
        None => write_rows(rows, format, io::stdout().lock()).map_err(Error::from),
    }
}

pub const CRITICAL_HEADER: &str = "gamma3,gamma1_c,ci_lo,ci_hi,censored,criterion";

pub fn critical_line(gamma3: f64, estimate: &CriticalEstimate, criterion: Criterion) -> String {
    format!(
        "{},{},{},{},{},{}",
        num(gamma3),
        num(estimate.gamma1_c),
        num(estimate.ci_lo),
        num(estimate.ci_hi),
        estimate.censored,
        criterion.label()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RatesConfig;
    use crate::observables::Summary;

    fn point() -> SweepPoint {
        let s = |m: f64| Summary {
            mean: m,
            variance: Some(m / 2.0),
            std_error: 0.01,
            ci_lo: m - 0.1,
            ci_hi: m + 0.1,
        };
        SweepPoint {
            size: 8,
            rates: RatesConfig::new(0.01, 1.0, 10.0).unwrap(),
            t_max: 100.0,
            series: vec![EnsembleStats {
                time: 100.0,
                count: 20,
                flagged: false,
                density: s(0.1),
                depth: s(0.02),
                depth_variance: Some(0.003),
                p_eps: s(0.25),
            }],
            trajectories: 20,
            failed_trajectories: 0,
            complete: true,
            skipped: false,
            estimated_events: 0.0,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_rows(&[], Format::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_point_gives_full_row() {
        let rs = rows(&[point()], 7);
        let mut buf = Vec::new();
        write_rows(&rs, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 14);
        assert!(cells.iter().all(|c| !c.is_empty()));
        assert_eq!(cells[1], "8");
        assert_eq!(cells[13], "7");
        assert_eq!(cells[2].parse::<f64>().unwrap(), 0.01);
        assert_eq!(cells[2], "1.0000000000000000e-2");
    }

    #[test]
    fn jsonl_mirrors_csv_fields() {
        let rs = rows(&[point(), point()], 7);
        let mut buf = Vec::new();
        write_rows(&rs, Format::Jsonl, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected: Vec<&str> = CSV_HEADER.split(',').collect();
        let mut got = keys.clone();
        expected.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, expected);
        assert_eq!(v["p_eps"], 0.25);
    }

    #[test]
    fn formatting_round_trips() {
        for x in [0.1 + 0.2, 1.0 / 3.0, 6.02e23, 5e-324, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn io_error_names_path() {
        let bad = Path::new("/nonexistent-dir/rows.csv");
        let err = emit(&[], Format::Csv, Some(bad)).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/rows.csv"));
    }
}
