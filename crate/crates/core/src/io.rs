//! Numeric CSV tables and file checksums.
//!
//! Input files are comma separated; `#` starts a comment line and a first
//! row that does not parse as numbers is taken as the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{DecayTrace, SpectrumTrace};
use crate::purcell::LifetimeSample;
use crate::scan::{LockMeta, LockState, LockTrace, ScanTrace};
use crate::tmm::DispersionPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Column `i` if every row has it.
    pub fn optional_column(&self, i: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.get(i).copied()).collect()
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Parses CSV text; every data row needs between `min_cols` and `max_cols`
/// finite numbers.
pub fn parse_table(text: &str, path: &Path, min_cols: usize, max_cols: usize) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if header.is_none() && rows.is_empty() => {
                header = Some(rec.iter().map(str::to_owned).collect());
                continue;
            }
            Err(e) => return Err(parse_err(path, line, format!("not a number: {e}"))),
        };
        if values.len() < min_cols || values.len() > max_cols {
            return Err(parse_err(
                path,
                line,
                format!(
                    "expected {min_cols}..={max_cols} columns, found {}",
                    values.len()
                ),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(path, line, format!("non-finite value {v}")));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path, min_cols: usize, max_cols: usize) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    parse_table(&text, path, min_cols, max_cols)
}

/// `x, y[, sigma]`.
pub fn read_spectrum(path: &Path) -> Result<SpectrumTrace> {
    let t = read_table(path, 2, 3)?;
    let trace = SpectrumTrace::new(t.column(0), t.column(1))?;
    match t.optional_column(2) {
        Some(s) => trace.with_sigma(s),
        None => Ok(trace),
    }
}

/// `t_ns, counts`.
pub fn read_decay(path: &Path) -> Result<DecayTrace> {
    let t = read_table(path, 2, 2)?;
    DecayTrace::new(t.column(0), t.column(1))
}

/// `temperature_k, value[, sigma]`.
pub fn read_series(path: &Path) -> Result<(Vec<(f64, f64)>, Option<Vec<f64>>)> {
    let t = read_table(path, 2, 3)?;
    Ok((
        t.rows.iter().map(|r| (r[0], r[1])).collect(),
        t.optional_column(2),
    ))
}

/// `gap_proxy_nm, wavelength_nm`.
pub fn read_dispersion_points(path: &Path) -> Result<Vec<DispersionPoint>> {
    let t = read_table(path, 2, 2)?;
    Ok(t.rows
        .iter()
        .map(|r| DispersionPoint {
            gap_proxy_nm: r[0],
            wavelength_nm: r[1],
        })
        .collect())
}

/// `l_eff_um, tau_ns, sigma_ns`.
pub fn read_lifetimes(path: &Path) -> Result<Vec<LifetimeSample>> {
    let t = read_table(path, 3, 3)?;
    Ok(t.rows
        .iter()
        .map(|r| LifetimeSample {
            l_eff_um: r[0],
            tau_ns: r[1],
            sigma_ns: r[2],
        })
        .collect())
}

/// `x, transmission`.
pub fn read_scan(path: &Path) -> Result<ScanTrace> {
    let t = read_table(path, 2, 2)?;
    ScanTrace::new(t.column(0), t.column(1))
}

/// `t_s, transmission`.
pub fn read_lock(path: &Path, state: LockState, meta: LockMeta) -> Result<LockTrace> {
    let t = read_table(path, 2, 2)?;
    LockTrace::new(t.column(0), t.column(1), state, meta)
}

/// Writes a header line and rows with full precision.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
