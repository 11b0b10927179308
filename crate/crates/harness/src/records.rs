//! CSV row types and their text encoding.

use std::io::Write;
use std::path::Path;

use crate::config::Selector;
use crate::error::{io_err, HarnessError, Result};

pub const SWEEP_HEADER: [&str; 15] = [
    "method",
    "n",
    "r",
    "p",
    "s",
    "rho",
    "kappa",
    "seed",
    "f",
    "f_org",
    "steps",
    "converged",
    "wall_ms",
    "step_ms_mean",
    "f_org_minus_greedy",
];

pub const TRACE_HEADER: [&str; 4] = ["step", "f", "decrement", "elapsed_ms"];

pub const RHO_HEADER: [&str; 13] = [
    "method",
    "n",
    "r",
    "p",
    "s",
    "rho",
    "kappa",
    "trials",
    "f_mean",
    "f_org_mean",
    "steps_mean",
    "wall_ms_mean",
    "converged_count",
];

/// 17 significant digits; `nan`, `inf` and `-inf` spelled out.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged(bool),
    Error(&'static str),
}

impl Status {
    pub fn encode(self) -> String {
        match self {
            Status::Converged(c) => c.to_string(),
            Status::Error(code) => format!("error:{code}"),
        }
    }

    pub fn is_error(self) -> bool {
        matches!(self, Status::Error(_))
    }
}

/// Stable short code for a failure recorded in a CSV row.
pub fn error_code(e: &sensel_core::Error) -> &'static str {
    use sensel_core::Error as E;
    match e {
        E::InvalidDimension(_) => "invalid_dimension",
        E::InvalidRank { .. } => "invalid_rank",
        E::InvalidArgument(_) => "invalid_argument",
        E::NonFinite { .. } => "non_finite",
        E::Domain { .. } => "domain",
        E::RankDeficient { .. } => "rank_deficient",
        E::InvalidSketch(_) => "invalid_sketch",
        E::DampedSolveFailure { .. } => "damped_solve",
        E::LineSearchFailure { .. } => "line_search",
        E::Parse { .. } => "parse",
        E::Io { .. } => "io",
    }
}

/// One `(method, p, trial)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Selector,
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub kappa: f64,
    pub seed: u64,
    /// Relaxed objective at termination; `nan` for baselines.
    pub f: f64,
    pub f_org: f64,
    pub steps: usize,
    pub status: Status,
    pub wall_ms: f64,
    pub step_ms_mean: f64,
    pub f_org_minus_greedy: f64,
}

impl ResultRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.n.to_string(),
            self.r.to_string(),
            self.p.to_string(),
            self.s.to_string(),
            fmt_float(self.rho),
            fmt_float(self.kappa),
            self.seed.to_string(),
            fmt_float(self.f),
            fmt_float(self.f_org),
            self.steps.to_string(),
            self.status.encode(),
            fmt_float(self.wall_ms),
            fmt_float(self.step_ms_mean),
            fmt_float(self.f_org_minus_greedy),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoRow {
    pub method: Selector,
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub kappa: f64,
    pub trials: usize,
    pub f_mean: f64,
    pub f_org_mean: f64,
    pub steps_mean: f64,
    pub wall_ms_mean: f64,
    pub converged_count: usize,
}

impl RhoRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.n.to_string(),
            self.r.to_string(),
            self.p.to_string(),
            self.s.to_string(),
            fmt_float(self.rho),
            fmt_float(self.kappa),
            self.trials.to_string(),
            fmt_float(self.f_mean),
            fmt_float(self.f_org_mean),
            fmt_float(self.steps_mean),
            fmt_float(self.wall_ms_mean),
            self.converged_count.to_string(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let wrap = |e: csv::Error| HarnessError::Usage(format!("csv write failed: {e}"));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| HarnessError::Usage(format!("csv write failed: {e}")))?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_csv(std::io::BufWriter::new(file), header, rows)
}

/// A parsed CSV: header plus string records.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        let mut rdr = csv::Reader::from_reader(file);
        let input = |msg: String| HarnessError::Input {
            path: path.to_path_buf(),
            msg,
        };
        let header = rdr
            .headers()
            .map_err(|e| input(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(|e| input(e.to_string()))?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::MissingColumn {
                path: path.to_path_buf(),
                column: name.into(),
            })
    }
}
