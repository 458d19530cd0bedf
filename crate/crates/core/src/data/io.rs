//! CSV layout: a header of column names, then one comma-separated row of
//! decimal values per timestamp. Labels live in `<data>.labels.csv` (one
//! 0/1 per line) and channel boundaries in `<data>.bounds.csv` (one index
//! per line).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::TimeSeries;
use crate::error::{Error, Result};

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn labels_path(data: &Path) -> PathBuf {
    sibling(data, ".labels.csv")
}

pub fn bounds_path(data: &Path) -> PathBuf {
    sibling(data, ".bounds.csv")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a header-less single-column file of values.
pub fn read_single_column<V: std::str::FromStr>(path: &Path) -> Result<Vec<V>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("cannot parse {:?}", l.trim())))
        })
        .collect()
}

pub fn load_series(path: &Path) -> Result<TimeSeries> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(parse_err(path, 1, "empty column name"));
    }
    let d = names.len();
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut width = 0;
        for cell in line.split(',') {
            width += 1;
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("non-numeric cell {:?}", cell.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(path, i + 1, format!("non-finite cell {:?}", cell.trim())));
            }
            values.push(v);
        }
        if width != d {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {d} cells, found {width}"),
            ));
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut series = TimeSeries::new(name, names, values)?;

    let lp = labels_path(path);
    if lp.exists() {
        let labels: Vec<u8> = read_single_column(&lp)?;
        series = series
            .with_labels(labels)
            .map_err(|e| parse_err(&lp, 0, e.to_string()))?;
    }
    let bp = bounds_path(path);
    if bp.exists() {
        let bounds: Vec<usize> = read_single_column(&bp)?;
        series = series
            .with_boundaries(bounds)
            .map_err(|e| parse_err(&bp, 0, e.to_string()))?;
    }
    Ok(series)
}

/// Writes the data file plus label and boundary companions when present.
/// Values use the shortest representation that parses back exactly.
pub fn save_series(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = series.column_names.join(",");
    out.push('\n');
    for t in 0..series.len() {
        for (c, v) in series.row(t).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    if let Some(labels) = series.labels() {
        let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(labels_path(path), body)?;
    }
    if !series.boundaries().is_empty() {
        let body: String = series.boundaries().iter().map(|b| format!("{b}\n")).collect();
        fs::write(bounds_path(path), body)?;
    }
    Ok(())
}
