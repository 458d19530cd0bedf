//! Time-series containers, CSV ingestion, normalization, window sampling
//! and the synthetic sine-wave benchmark.

mod io;
mod normalize;
mod sine;
mod window;

pub use io::{bounds_path, labels_path, load_series, read_single_column, save_series};
pub use normalize::NormStats;
pub use sine::{generate_sine_dataset, SineConfig, SineDataset, TypicalKind};
pub use window::{sample_start, sample_window, segments};

use crate::error::{Error, Result};

/// `T×D` values stored row-major, one row per timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub column_names: Vec<String>,
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
    /// Indices where a new concatenated channel starts; windows never
    /// straddle one.
    boundaries: Vec<usize>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, column_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let d = column_names.len();
        if d == 0 {
            return Err(Error::Data("series needs at least one column".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::Data(format!(
                "{} values do not fill rows of width {d}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, column {}",
                i / d,
                i % d
            )));
        }
        Ok(TimeSeries {
            name: name.into(),
            column_names,
            values,
            labels: None,
            boundaries: Vec::new(),
        })
    }

    /// Builds a single-column series named `value`.
    pub fn univariate(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, vec!["value".to_string()], values)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Data(format!(
                "{} labels for {} timestamps",
                labels.len(),
                self.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_boundaries(mut self, mut boundaries: Vec<usize>) -> Result<Self> {
        boundaries.sort_unstable();
        boundaries.dedup();
        boundaries.retain(|&b| b != 0);
        if boundaries.last().is_some_and(|&b| b >= self.len()) {
            return Err(Error::Data(format!(
                "boundary beyond series length {}",
                self.len()
            )));
        }
        self.boundaries = boundaries;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.column_names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.values[t * d..(t + 1) * d]
    }

    /// Rows `[start, start + len)` as a row-major slice.
    pub fn rows(&self, start: usize, len: usize) -> &[f64] {
        let d = self.dim();
        &self.values[start * d..(start + len) * d]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(c).step_by(self.dim()).copied()
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let d = self.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % d, v))
            .collect();
        TimeSeries {
            values,
            ..self.clone()
        }
    }
}
