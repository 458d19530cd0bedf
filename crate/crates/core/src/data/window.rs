use std::ops::Range;

use rand::Rng;

use super::TimeSeries;
use crate::error::{Error, Result};

/// Contiguous index ranges between channel boundaries.
pub fn segments(series: &TimeSeries) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(series.boundaries().len() + 1);
    let mut start = 0;
    for &b in series.boundaries() {
        out.push(start..b);
        start = b;
    }
    out.push(start..series.len());
    out
}

/// Uniform random start of a length-`n` slice lying inside one segment.
pub fn sample_start(series: &TimeSeries, n: usize, rng: &mut impl Rng) -> Result<usize> {
    let segs = segments(series);
    let counts: Vec<usize> = segs
        .iter()
        .map(|s| (s.len() + 1).saturating_sub(n))
        .collect();
    let total: usize = counts.iter().sum();
    if n == 0 || total == 0 {
        return Err(Error::Data(format!(
            "series {} has no segment of length {n}",
            series.name
        )));
    }
    let mut k = rng.random_range(0..total);
    for (seg, count) in segs.iter().zip(counts) {
        if k < count {
            return Ok(seg.start + k);
        }
        k -= count;
    }
    unreachable!("k < total")
}

/// A random `n×D` window from `series`, copied row-major.
pub fn sample_window(series: &TimeSeries, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let start = sample_start(series, n, rng)?;
    Ok(series.rows(start, n).to_vec())
}
