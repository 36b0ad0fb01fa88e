//! Reading, writing and preprocessing of observed curves.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FunctionalSeries, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Delimiter {
    /// Tab if the first line contains one, comma otherwise.
    #[default]
    Auto,
    Tab,
    Comma,
}

/// What to do with rows that contain cells which are not finite numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RowPolicy {
    /// Drop the row and log a warning (days with missing observations).
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadOptions {
    pub delimiter: Delimiter,
    pub header: bool,
    pub labels: bool,
    pub policy: RowPolicy,
}

/// One curve per row, one column per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based file lines of the rows dropped under [`RowPolicy::Drop`].
    pub dropped: Vec<usize>,
}

impl CurveTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of grid points per curve.
    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// The curves as a series on the midpoint grid with one point per column.
    pub fn to_series(&self) -> Result<FunctionalSeries> {
        if self.rows.is_empty() {
            return Err(Error::invalid("curve table is empty"));
        }
        FunctionalSeries::from_rows(&self.rows, Grid1D::new(self.columns())?)
    }
}

fn detect_delimiter(first_line: &str, delimiter: Delimiter) -> u8 {
    match delimiter {
        Delimiter::Tab => b'\t',
        Delimiter::Comma => b',',
        Delimiter::Auto if first_line.contains('\t') => b'\t',
        Delimiter::Auto => b',',
    }
}

pub fn load_curves(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<CurveTable> {
    let file = File::open(path.as_ref())?;
    parse_curves(BufReader::new(file), opts)
}

pub fn parse_curves<R: Read>(reader: R, opts: &LoadOptions) -> Result<CurveTable> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let delim = detect_delimiter(&first, opts.delimiter);
    let chained = first.as_bytes().chain(reader);
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(chained);

    let mut labels = opts.labels.then(Vec::new);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in csv.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse { row: line, column: 0, message: e.to_string() })?;
        if opts.header && idx == 0 {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        let skip = usize::from(opts.labels);
        let cells: Vec<&str> = record.iter().skip(skip).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row: line,
                    column: cells.len().min(w) + skip + 1,
                    message: format!("row has {} value columns, expected {w}", cells.len()),
                })
            }
            _ => {}
        }
        let parsed: std::result::Result<Vec<f64>, usize> =
            cells.iter().enumerate().map(|(j, c)| c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(j)).collect();
        match parsed {
            Ok(values) => {
                if let Some(l) = labels.as_mut() {
                    l.push(record.get(0).unwrap_or_default().to_string());
                }
                rows.push(values);
            }
            Err(j) => match opts.policy {
                RowPolicy::Drop => {
                    warn!("dropping row {line}: column {} is not a finite number", j + skip + 1);
                    dropped.push(line);
                }
                RowPolicy::Error => {
                    return Err(Error::Parse {
                        row: line,
                        column: j + skip + 1,
                        message: format!("{:?} is not a finite number", cells[j]),
                    })
                }
            },
        }
    }
    if width == Some(0) {
        return Err(Error::Parse { row: 1, column: 1, message: "no value columns".into() });
    }
    Ok(CurveTable { labels, rows, dropped })
}

/// Writes one curve per line, tab separated, with 17 significant digits.
pub fn write_curves<W: Write>(mut out: W, series: &FunctionalSeries, labels: Option<&[String]>) -> Result<()> {
    for (t, row) in series.rows().enumerate() {
        let mut line = String::new();
        if let Some(l) = labels {
            line.push_str(&l[t]);
            line.push('\t');
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        line.push_str(&cells.join("\t"));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Intraday cumulative returns `R_t(x_j) = 100 (log P_t(x_j) - log P_t(x_1))`.
pub fn intraday_returns(prices: &CurveTable) -> Result<FunctionalSeries> {
    let mut rows = Vec::with_capacity(prices.len());
    for (t, row) in prices.rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|&p| p <= 0.0) {
            return Err(Error::Domain {
                t: t + 1,
                j: j + 1,
                message: format!("price {} is not strictly positive", row[j]),
            });
        }
        let base = row[0].ln();
        let mut r: Vec<f64> = row.iter().map(|p| 100.0 * (p.ln() - base)).collect();
        r[0] = 0.0;
        rows.push(r);
    }
    CurveTable { labels: None, rows, dropped: Vec::new() }.to_series()
}

/// Optional removal of a mean curve before testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Demean {
    #[default]
    None,
    /// Subtract the sample mean curve.
    Global,
    /// Subtract the mean over curves `t - n ..= t + n`.
    Local(usize),
}

impl std::str::FromStr for Demean {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Demean::None),
            "global" => Ok(Demean::Global),
            _ => s
                .strip_prefix("local:")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .map(Demean::Local)
                .ok_or_else(|| Error::invalid(format!("invalid demean mode {s:?}; use none, global or local:N"))),
        }
    }
}

pub fn demean(series: &FunctionalSeries, mode: Demean) -> Result<FunctionalSeries> {
    let t_len = series.len();
    let m = series.grid().len();
    let mut values = series.values().to_vec();
    match mode {
        Demean::None => return Ok(series.clone()),
        Demean::Global => {
            let mut mean = vec![0.0; m];
            for row in series.rows() {
                mean.iter_mut().zip(row).for_each(|(a, x)| *a += x);
            }
            mean.iter_mut().for_each(|a| *a /= t_len as f64);
            for row in values.chunks_exact_mut(m) {
                row.iter_mut().zip(&mean).for_each(|(x, a)| *x -= a);
            }
        }
        Demean::Local(n) => {
            for (t, row) in values.chunks_exact_mut(m).enumerate() {
                let lo = t.saturating_sub(n);
                let hi = (t + n).min(t_len - 1);
                for (j, x) in row.iter_mut().enumerate() {
                    let mean = (lo..=hi).map(|s| series.curve(s)[j]).sum::<f64>() / (hi - lo + 1) as f64;
                    *x -= mean;
                }
            }
        }
    }
    FunctionalSeries::new(values, t_len, *series.grid())
}
