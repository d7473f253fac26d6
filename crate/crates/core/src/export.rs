//! Tabular output: CSV and JSON rows in one fixed schema, plus a
//! whitespace-separated plot data file.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::TradeoffPoint;
use crate::vcts::VctsBounds;

pub const COLUMNS: [&str; 12] = [
    "source",
    "policy",
    "sweep_param",
    "sigma_e2",
    "p_cct",
    "avg_delay_s",
    "avg_power",
    "per_measured",
    "delay_bound_s",
    "power_bound",
    "slots",
    "seed",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed table: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytical,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One output row. Cells a source does not produce are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub source: Source,
    pub policy: String,
    pub sweep_param: f64,
    pub sigma_e2: f64,
    pub p_cct: f64,
    pub avg_delay_s: Option<f64>,
    pub avg_power: Option<f64>,
    pub per_measured: Option<f64>,
    pub delay_bound_s: Option<f64>,
    pub power_bound: Option<f64>,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
}

impl Row {
    pub fn analytical(policy: &str, sweep_param: f64, sigma_e2: f64, p_cct: f64, bounds: &VctsBounds) -> Self {
        Self {
            source: Source::Analytical,
            policy: policy.into(),
            sweep_param,
            sigma_e2,
            p_cct,
            avg_delay_s: None,
            avg_power: None,
            per_measured: None,
            delay_bound_s: Some(bounds.delay_upper),
            power_bound: Some(bounds.power_lower),
            slots: None,
            seed: None,
        }
    }

    fn cells(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_sig).unwrap_or_default();
        let int = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            match self.source {
                Source::Analytical => "analytical".into(),
                Source::Simulated => "simulated".into(),
            },
            self.policy.clone(),
            format_sig(self.sweep_param),
            format_sig(self.sigma_e2),
            format_sig(self.p_cct),
            opt(self.avg_delay_s),
            opt(self.avg_power),
            opt(self.per_measured),
            opt(self.delay_bound_s),
            opt(self.power_bound),
            int(self.slots),
            int(self.seed),
        ]
    }
}

/// The simulated row for a point, followed by its analytical row when
/// bounds are attached.
pub fn rows_from_point(p: &TradeoffPoint) -> Vec<Row> {
    let mut rows = vec![Row {
        source: Source::Simulated,
        policy: p.policy.clone(),
        sweep_param: p.sweep_param,
        sigma_e2: p.sigma_e2,
        p_cct: p.p_cct,
        avg_delay_s: Some(p.stats.avg_delay),
        avg_power: Some(p.stats.avg_power),
        per_measured: Some(p.stats.conditional_per),
        delay_bound_s: None,
        power_bound: None,
        slots: Some(p.stats.slots_simulated),
        seed: Some(p.stats.seed),
    }];
    if let Some(b) = &p.bounds {
        rows.push(Row::analytical(&p.policy, p.sweep_param, p.sigma_e2, p.p_cct, b));
    }
    rows
}

/// Twelve significant digits, shortest rendering of the rounded value.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let a = rounded.abs();
    if (1e-6..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Stable sort by `(policy, sweep_param, source)`.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        a.policy
            .cmp(&b.policy)
            .then_with(|| a.sweep_param.partial_cmp(&b.sweep_param).unwrap_or(Ordering::Equal))
            .then_with(|| a.source.cmp(&b.source))
    });
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), ExportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, rows: &[Row]) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n").map_err(|e| ExportError::Format(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Row>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != COLUMNS {
        return Err(ExportError::Format(format!("unexpected header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<Row>, _>>()?)
}

/// Gnuplot-style blocks, one per `(policy, source)`, separated by two blank
/// lines: `sweep_param delay power`.
pub fn write_plot_data<W: Write>(mut out: W, rows: &[Row]) -> std::io::Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.policy
            .cmp(&b.policy)
            .then(a.source.cmp(&b.source))
            .then_with(|| a.sweep_param.partial_cmp(&b.sweep_param).unwrap_or(Ordering::Equal))
    });
    let mut current: Option<(String, Source)> = None;
    for r in &sorted {
        let key = (r.policy.clone(), r.source);
        if current.as_ref() != Some(&key) {
            if current.is_some() {
                writeln!(out, "\n")?;
            }
            writeln!(out, "# {} {:?} sweep_param delay_s power", r.policy, r.source)?;
            current = Some(key);
        }
        let (d, p) = match r.source {
            Source::Simulated => (r.avg_delay_s, r.avg_power),
            Source::Analytical => (r.delay_bound_s, r.power_bound),
        };
        let cell = |x: Option<f64>| x.map(format_sig).unwrap_or_else(|| "nan".into());
        writeln!(out, "{} {} {}", format_sig(r.sweep_param), cell(d), cell(p))?;
    }
    Ok(())
}

/// Path of the plot data file written next to `out`.
pub fn plot_path(out: &Path) -> PathBuf {
    out.with_extension("plot.dat")
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    File::create(path).map(BufWriter::new).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Sorts `rows`, writes them to `path` and writes the plot data file.
pub fn write_table(path: &Path, rows: &mut [Row], format: Format) -> Result<PathBuf, ExportError> {
    sort_rows(rows);
    let out = create(path)?;
    match format {
        Format::Csv => write_csv(out, rows)?,
        Format::Json => write_json(out, rows)?,
    }
    let plot = plot_path(path);
    let mut w = create(&plot)?;
    write_plot_data(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|source| ExportError::Io {
            path: plot.clone(),
            source,
        })?;
    Ok(plot)
}
