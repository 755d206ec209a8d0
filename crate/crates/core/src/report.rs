//! Reading the CSV tables this crate writes and aggregating them into fits, a
//! pass/fail table and gnuplot-ready data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{EdgeRow, StieltjesRow};
use crate::km::km_cdf;
use crate::stats::{ks_distance, loglog_fit, median, quantile, std_dev, LinearFit};

/// Largest CSV the reader accepts, in bytes.
pub const MAX_CSV_BYTES: usize = 1 << 30;

pub const RIGIDITY_COLUMNS: &[&str] = &["n", "d", "seed", "i", "lambda_i", "gamma_i", "r_i"];
pub const EDGE_SCAN_COLUMNS: &[&str] = &["n", "d", "seed", "lambda2", "lambdaN"];
pub const STIELTJES_COLUMNS: &[&str] = &["n", "d", "seed", "E", "eta", "abs_m_minus_md"];
pub const GAMMA_COLUMNS: &[&str] = &["i", "gamma_i"];
pub const SPECTRUM_COLUMNS: &[&str] = &["n", "d", "seed", "i", "lambda_i"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("input exceeds the reader limit")]
    TooLarge,
    #[error("input is not valid UTF-8")]
    Utf8,
    #[error("missing column header")]
    MissingHeader,
    #[error("unrecognized column header {0:?}")]
    Schema(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Fields { line: usize, expected: usize, found: usize },
    #[error("line {line}: invalid value {token:?} in column {column}")]
    Value { line: usize, column: String, token: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RigidityRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub i: usize,
    pub lambda_i: f64,
    pub gamma_i: f64,
    pub r_i: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Table {
    Rigidity(Vec<RigidityRow>),
    EdgeScan(Vec<EdgeRow>),
    Stieltjes(Vec<StieltjesRow>),
    Gamma(Vec<(usize, f64)>),
    Spectrum(Vec<SpectrumRow>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub i: usize,
    pub lambda_i: f64,
}

/// A parsed output file: its `# key=value` header and typed rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvFile {
    pub config: Vec<(String, String)>,
    pub table: Table,
}

struct Fields<'a> {
    line: usize,
    columns: &'static [&'static str],
    parts: Vec<&'a str>,
}

impl Fields<'_> {
    fn get<T: std::str::FromStr>(&self, k: usize) -> Result<T, ReportError> {
        let token = self.parts[k];
        let err = || ReportError::Value {
            line: self.line,
            column: self.columns[k].to_string(),
            token: token.to_string(),
        };
        let value: T = token.parse().map_err(|_| err())?;
        Ok(value)
    }

    fn real(&self, k: usize) -> Result<f64, ReportError> {
        let x: f64 = self.get(k)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(ReportError::Value {
                line: self.line,
                column: self.columns[k].to_string(),
                token: self.parts[k].to_string(),
            })
        }
    }
}

/// Parses a CSV written by this crate. Leading `#` lines carry the run config.
pub fn parse_report_csv(input: &[u8]) -> Result<CsvFile, ReportError> {
    if input.len() > MAX_CSV_BYTES {
        return Err(ReportError::TooLarge);
    }
    let text = std::str::from_utf8(input).map_err(|_| ReportError::Utf8)?;
    let mut lines = text.lines().enumerate().peekable();
    let mut config = Vec::new();
    while let Some((_, l)) = lines.peek() {
        let Some(rest) = l.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once('=') {
            config.push((k.trim().to_string(), v.trim().to_string()));
        }
        lines.next();
    }
    let Some((_, header)) = lines.next() else {
        return Err(ReportError::MissingHeader);
    };
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let columns: &'static [&'static str] = [RIGIDITY_COLUMNS, EDGE_SCAN_COLUMNS, STIELTJES_COLUMNS, GAMMA_COLUMNS, SPECTRUM_COLUMNS]
        .into_iter()
        .find(|c| *c == names.as_slice())
        .ok_or_else(|| ReportError::Schema(header.to_string()))?;
    let mut records = Vec::new();
    for (k, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split(',').map(str::trim).collect();
        if parts.len() != columns.len() {
            return Err(ReportError::Fields { line: k + 1, expected: columns.len(), found: parts.len() });
        }
        records.push(Fields { line: k + 1, columns, parts });
    }
    let table = if columns == RIGIDITY_COLUMNS {
        Table::Rigidity(
            records
                .iter()
                .map(|f| {
                    Ok(RigidityRow {
                        n: f.get(0)?,
                        d: f.get(1)?,
                        seed: f.get(2)?,
                        i: f.get(3)?,
                        lambda_i: f.real(4)?,
                        gamma_i: f.real(5)?,
                        r_i: f.real(6)?,
                    })
                })
                .collect::<Result<_, ReportError>>()?,
        )
    } else if columns == EDGE_SCAN_COLUMNS {
        Table::EdgeScan(
            records
                .iter()
                .map(|f| {
                    Ok(EdgeRow { n: f.get(0)?, d: f.get(1)?, seed: f.get(2)?, lambda2: f.real(3)?, lambda_n: f.real(4)? })
                })
                .collect::<Result<_, ReportError>>()?,
        )
    } else if columns == STIELTJES_COLUMNS {
        Table::Stieltjes(
            records
                .iter()
                .map(|f| {
                    Ok(StieltjesRow {
                        n: f.get(0)?,
                        d: f.get(1)?,
                        seed: f.get(2)?,
                        e: f.real(3)?,
                        eta: f.real(4)?,
                        abs_m_minus_md: f.real(5)?,
                    })
                })
                .collect::<Result<_, ReportError>>()?,
        )
    } else if columns == SPECTRUM_COLUMNS {
        Table::Spectrum(
            records
                .iter()
                .map(|f| Ok(SpectrumRow { n: f.get(0)?, d: f.get(1)?, seed: f.get(2)?, i: f.get(3)?, lambda_i: f.real(4)? }))
                .collect::<Result<_, ReportError>>()?,
        )
    } else {
        Table::Gamma(records.iter().map(|f| Ok((f.get(0)?, f.real(1)?))).collect::<Result<_, ReportError>>()?)
    };
    Ok(CsvFile { config, table })
}

/// A pass/fail verdict produced by a subcommand and carried in its JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Acceptance bands applied to aggregated tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bands {
    pub edge_slope: (f64, f64),
    pub rigidity_slope_max: f64,
    pub rigidity_stderr_max: f64,
    pub stieltjes_spread_max: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self { edge_slope: (-0.80, -0.55), rigidity_slope_max: 0.15, rigidity_stderr_max: 0.1, stieltjes_spread_max: 3.0 }
    }
}

/// Two-column data for one plot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotData {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub log_scale: bool,
}

impl PlotData {
    pub fn file_name(&self) -> String {
        format!("{}.dat", self.name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {} {}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x} {y}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: LinearFit,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    /// One row per acceptance criterion that some input speaks to.
    pub criteria: Vec<Check>,
    pub fits: Vec<NamedFit>,
    /// Largest `r_i` over all rigidity rows.
    pub max_rigidity: Option<f64>,
    pub plots: Vec<PlotData>,
}

fn fit_groups(name: &str, groups: &BTreeMap<usize, f64>) -> Option<NamedFit> {
    if groups.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = groups.keys().map(|&n| n as f64).collect();
    let ys: Vec<f64> = groups.values().copied().collect();
    loglog_fit(&xs, &ys).ok().map(|fit| NamedFit { name: name.into(), fit })
}

fn plot(name: &str, x: &str, y: &str, groups: &BTreeMap<usize, f64>) -> PlotData {
    PlotData {
        name: name.into(),
        x_label: x.into(),
        y_label: y.into(),
        points: groups.iter().map(|(&n, &v)| (n as f64, v)).collect(),
        log_scale: true,
    }
}

/// Aggregates parsed tables and subcommand checks into a report.
pub fn build_report(files: &[CsvFile], checks: &[Check], bands: &Bands) -> Report {
    let mut report = Report::default();
    let mut rigidity: Vec<&RigidityRow> = Vec::new();
    let mut edges: Vec<&EdgeRow> = Vec::new();
    let mut stieltjes: Vec<&StieltjesRow> = Vec::new();
    let mut spectra: BTreeMap<(usize, usize, u64), Vec<f64>> = BTreeMap::new();
    for f in files {
        match &f.table {
            Table::Rigidity(rows) => rigidity.extend(rows),
            Table::EdgeScan(rows) => edges.extend(rows),
            Table::Stieltjes(rows) => stieltjes.extend(rows),
            Table::Spectrum(rows) => {
                for r in rows {
                    if r.i >= 2 {
                        spectra.entry((r.n, r.d, r.seed)).or_default().push(r.lambda_i);
                    }
                }
            }
            Table::Gamma(_) => {}
        }
    }
    let mut criteria: Vec<Check> = checks.to_vec();

    if !spectra.is_empty() {
        let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for ((n, d, _), values) in &spectra {
            by_n.entry(*n).or_default().push(ks_distance(values, |x| km_cdf(*d, x)));
        }
        let medians: BTreeMap<usize, f64> = by_n.iter().map(|(&n, v)| (n, median(v))).collect();
        report.plots.push(plot("esd_ks_median", "N", "median_ks_distance", &medians));
        if let Some(nf) = fit_groups("esd_ks_median", &medians) {
            report.fits.push(nf);
        }
    }

    if !rigidity.is_empty() {
        report.max_rigidity = rigidity.iter().map(|r| r.r_i).reduce(f64::max);
        let mut per_sample: BTreeMap<(usize, u64), f64> = BTreeMap::new();
        for r in &rigidity {
            let e = per_sample.entry((r.n, r.seed)).or_insert(0.0);
            *e = e.max(r.r_i);
        }
        let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for ((n, _), m) in per_sample {
            by_n.entry(n).or_default().push(m);
        }
        let medians: BTreeMap<usize, f64> = by_n.iter().map(|(&n, v)| (n, median(v))).collect();
        report.plots.push(plot("rigidity_median_max_r", "N", "median_max_r", &medians));
        if let Some(nf) = fit_groups("rigidity_median_max_r", &medians) {
            let pass = nf.fit.slope < bands.rigidity_slope_max && nf.fit.slope_stderr < bands.rigidity_stderr_max;
            criteria.push(Check {
                criterion: 7,
                name: "rigidity scaling".into(),
                pass,
                detail: format!(
                    "growth exponent {:.4} (stderr {:.4}) vs < {} (stderr < {})",
                    nf.fit.slope, nf.fit.slope_stderr, bands.rigidity_slope_max, bands.rigidity_stderr_max
                ),
            });
            report.fits.push(nf);
        }
    }

    if !edges.is_empty() {
        let mut by_n: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &edges {
            let e = by_n.entry(r.n).or_default();
            e.0.push(r.lambda2 - 2.0);
            e.1.push(r.lambda_n.abs() - 2.0);
        }
        let top: BTreeMap<usize, f64> = by_n.iter().map(|(&n, v)| (n, std_dev(&v.0))).collect();
        let bottom: BTreeMap<usize, f64> = by_n.iter().map(|(&n, v)| (n, std_dev(&v.1))).collect();
        report.plots.push(plot("edge_std_lambda2", "N", "std_lambda2", &top));
        report.plots.push(plot("edge_std_lambdaN", "N", "std_abs_lambdaN", &bottom));
        if let Some(nf) = fit_groups("edge_std_lambda2", &top) {
            let (lo, hi) = bands.edge_slope;
            criteria.push(Check {
                criterion: 8,
                name: "edge fluctuation exponent".into(),
                pass: (lo..=hi).contains(&nf.fit.slope),
                detail: format!("slope {:.4} vs [{lo}, {hi}]", nf.fit.slope),
            });
            report.fits.push(nf);
        }
        if let Some(nf) = fit_groups("edge_std_lambdaN", &bottom) {
            report.fits.push(nf);
        }
    }

    if !stieltjes.is_empty() {
        let mut by_point: BTreeMap<(u64, u64), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        for r in &stieltjes {
            by_point
                .entry((r.e.to_bits(), r.eta.to_bits()))
                .or_default()
                .entry(r.n)
                .or_default()
                .push(r.abs_m_minus_md * r.n as f64 * r.eta);
        }
        let mut spreads = Vec::new();
        for ((e_bits, eta_bits), per_n) in &by_point {
            let (e, eta) = (f64::from_bits(*e_bits), f64::from_bits(*eta_bits));
            let q: BTreeMap<usize, f64> = per_n.iter().map(|(&n, v)| (n, quantile(v, 0.9))).collect();
            report.plots.push(plot(&format!("stieltjes_q90_E{e}_eta{eta}"), "N", "q90_times_N_eta", &q));
            if eta == 1.0 && e.abs() < 2.0 && q.len() >= 2 {
                let hi = q.values().copied().fold(f64::MIN, f64::max);
                let lo = q.values().copied().fold(f64::MAX, f64::min);
                spreads.push((e, hi / lo));
            }
        }
        if !spreads.is_empty() {
            let worst = spreads.iter().map(|s| s.1).fold(0.0, f64::max);
            criteria.push(Check {
                criterion: 9,
                name: "stieltjes concentration".into(),
                pass: worst < bands.stieltjes_spread_max,
                detail: format!("max/min of q90*N*eta across sizes {worst:.4} vs < {}", bands.stieltjes_spread_max),
            });
        }
    }

    // Merge verdicts per criterion: a criterion passes only if every check does.
    let mut merged: BTreeMap<u8, Check> = BTreeMap::new();
    for c in criteria {
        merged
            .entry(c.criterion)
            .and_modify(|m| {
                m.pass &= c.pass;
                m.name = format!("{}; {}", m.name, c.name);
                m.detail = format!("{}; {}", m.detail, c.detail);
            })
            .or_insert(c);
    }
    report.criteria = merged.into_values().collect();
    report
}

/// Fixed-width pass/fail table.
pub fn criteria_table(report: &Report) -> String {
    let mut out = String::new();
    for c in &report.criteria {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{:>2}  {verdict}  {}: {}", c.criterion, c.name, c.detail);
    }
    out
}

/// A gnuplot script drawing every plot from its `.dat` file.
pub fn gnuplot_script(plots: &[PlotData]) -> String {
    let mut out = String::from("set terminal pngcairo size 800,600\n");
    for p in plots {
        let _ = writeln!(out, "set output '{}.png'", p.name);
        if p.log_scale {
            out.push_str("set logscale xy\n");
        } else {
            out.push_str("unset logscale\n");
        }
        let _ = writeln!(out, "set xlabel '{}'\nset ylabel '{}'", p.x_label, p.y_label);
        let _ = writeln!(out, "plot '{}' using 1:2 with linespoints title '{}'", p.file_name(), p.name);
    }
    out
}
