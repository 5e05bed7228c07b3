use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Format, ScenarioConfig};
use crate::{Result, RunError};

/// One row of a curve table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub theta: f64,
    /// `None` where the sensitivity diverges.
    pub delta_theta: Option<f64>,
    pub gamma: f64,
    pub n_mean: f64,
    pub sigma2: f64,
    pub m: u64,
    pub route: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiRow {
    pub n: u64,
    pub nb_mean: f64,
    pub f_q: f64,
    pub delta_theta: f64,
    pub witness: bool,
}

pub trait TableRow {
    const COLUMNS: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl TableRow for CurveRow {
    const COLUMNS: &'static [&'static str] =
        &["theta", "delta_theta", "gamma", "n_mean", "sigma2", "m", "route"];

    fn fields(&self) -> Vec<String> {
        vec![
            format_float(self.theta),
            self.delta_theta.map(format_float).unwrap_or_default(),
            format_float(self.gamma),
            format_float(self.n_mean),
            format_float(self.sigma2),
            self.m.to_string(),
            self.route.clone(),
        ]
    }
}

impl TableRow for QfiRow {
    const COLUMNS: &'static [&'static str] = &["n", "nb_mean", "f_q", "delta_theta", "witness"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            format_float(self.nb_mean),
            format_float(self.f_q),
            format_float(self.delta_theta),
            self.witness.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDocument<R> {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<R>,
}

pub fn write_csv<R: TableRow, W: Write>(rows: &[R], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(R::COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()
}

pub fn write_json<R: TableRow + Serialize + Clone, W: Write>(
    rows: &[R],
    config: &ScenarioConfig,
    mut out: W,
) -> io::Result<()> {
    let doc = JsonDocument {
        config: config.clone(),
        seed: config.seed,
        columns: R::COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows: rows.to_vec(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()
}

/// Writes `rows` to `path`, or to stdout when `path` is `None`.
pub fn emit<R: TableRow + Serialize + Clone>(
    rows: &[R],
    config: &ScenarioConfig,
    path: Option<&Path>,
) -> Result<()> {
    let name = path.map_or("<stdout>".to_string(), |p| p.display().to_string());
    let io_err = |source| RunError::Io { path: name.clone(), source };
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(io_err)?)),
        None => Box::new(io::stdout().lock()),
    };
    match config.format {
        Format::Csv => write_csv(rows, sink),
        Format::Json => write_json(rows, config, sink),
    }
    .map_err(io_err)
}
