use crate::data::{segments, TimeSeries};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

pub const DEFAULT_STRIDE: usize = 16;
const SCORE_BATCH: usize = 16;

/// Anything that maps `N × D` windows (row-major) to `N` scores.
pub trait WindowScorer {
    fn window_size(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn score_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>>;
}

impl<T: Scalar> WindowScorer for ModelParams<T> {
    fn window_size(&self) -> usize {
        self.config().window_size
    }

    fn data_dim(&self) -> usize {
        self.config().data_dim
    }

    fn score_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let cast: Vec<Vec<T>> = windows.iter().map(|w| w.iter().map(|&v| T::of(v)).collect()).collect();
        let refs: Vec<&[T]> = cast.iter().map(Vec::as_slice).collect();
        Ok(self
            .score_windows(&refs)?
            .into_iter()
            .map(|s| s.into_iter().map(Scalar::as_f64).collect())
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyScores {
    pub scores: Vec<f64>,
    /// Number of windows covering each timestamp.
    pub coverage: Vec<u32>,
}

impl AnomalyScores {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.scores.len() * 20);
        for v in &self.scores {
            s.push_str(&format!("{v}\n"));
        }
        s
    }
}

/// Window starts for one segment `[a, b)`: `a, a+stride, …` plus a final
/// window flush with `b`.
pub fn window_starts(a: usize, b: usize, n: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (a..=b - n).step_by(stride).collect();
    if *out.last().unwrap() != b - n {
        out.push(b - n);
    }
    out
}

/// Per-timestamp scores averaged over every overlapping window.
pub fn sliding_scores(scorer: &impl WindowScorer, test: &TimeSeries, stride: usize) -> Result<AnomalyScores> {
    let n = scorer.window_size();
    if stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    if test.dim() != scorer.data_dim() {
        return Err(Error::Data(format!(
            "test data has {} columns, model expects {}",
            test.dim(),
            scorer.data_dim()
        )));
    }
    let mut starts = Vec::new();
    for (i, seg) in segments(test).into_iter().enumerate() {
        if seg.len() < n {
            return Err(Error::Data(format!(
                "segment {i} [{}, {}) has {} rows, shorter than window size {n}",
                seg.start,
                seg.end,
                seg.len()
            )));
        }
        starts.extend(window_starts(seg.start, seg.end, n, stride));
    }

    let mut sum = vec![0.0; test.len()];
    let mut coverage = vec![0u32; test.len()];
    for chunk in starts.chunks(SCORE_BATCH) {
        let windows: Vec<&[f64]> = chunk.iter().map(|&s| test.rows(s, n)).collect();
        let out = scorer.score_batch(&windows)?;
        for (&s, w) in chunk.iter().zip(&out) {
            if w.len() != n {
                return Err(Error::shape("sliding_scores", format!("scorer returned {} scores, expected {n}", w.len())));
            }
            for (k, &v) in w.iter().enumerate() {
                sum[s + k] += v;
                coverage[s + k] += 1;
            }
        }
    }
    let scores = sum.iter().zip(&coverage).map(|(&s, &c)| s / f64::from(c)).collect();
    Ok(AnomalyScores { scores, coverage })
}
