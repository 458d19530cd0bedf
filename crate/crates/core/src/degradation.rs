//! Synthetic outliers for self-supervised training: a random interval of a
//! training window is overwritten in a random subset of columns, and the
//! interval becomes the window's artificial label.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::data::{sample_start, TimeSeries};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutlierKind {
    /// Weighted blend with a segment taken from elsewhere in the training data.
    Soft,
    /// Interval held at its first value.
    Uniform,
    /// A single spike.
    Peak,
    /// Stretched or shortened copy of nearby data.
    Length,
}

impl OutlierKind {
    pub const ALL: [OutlierKind; 4] = [
        OutlierKind::Soft,
        OutlierKind::Uniform,
        OutlierKind::Peak,
        OutlierKind::Length,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutlierKind::Soft => "soft_replacement",
            OutlierKind::Uniform => "uniform_replacement",
            OutlierKind::Peak => "peak_noise",
            OutlierKind::Length => "length_adjustment",
        }
    }
}

impl fmt::Display for OutlierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutlierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = match s {
            "soft" | "soft_replacement" => OutlierKind::Soft,
            "uniform" | "uniform_replacement" => OutlierKind::Uniform,
            "peak" | "peak_noise" => OutlierKind::Peak,
            "length" | "length_adjustment" => OutlierKind::Length,
            _ => return Err(Error::Config(format!("unknown outlier kind {s:?}"))),
        };
        Ok(k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegradationConfig {
    pub p_soft: f64,
    pub p_uniform: f64,
    pub p_peak: f64,
    pub p_length: f64,
    /// Longest interval as a fraction of the window.
    pub max_len_frac: f64,
    pub min_len: usize,
    /// Probability that any given column is degraded.
    pub column_rate: f64,
    pub soft_weight_range: (f64, f64),
    pub peak_scale_range: (f64, f64),
    /// Probability of stretching rather than shortening.
    pub length_mode_prob: f64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        DegradationConfig {
            p_soft: 0.5,
            p_uniform: 0.15,
            p_peak: 0.15,
            p_length: 0.1,
            max_len_frac: 0.2,
            min_len: 2,
            column_rate: 0.3,
            soft_weight_range: (0.5, 1.0),
            peak_scale_range: (0.5, 2.0),
            length_mode_prob: 0.5,
        }
    }
}

impl DegradationConfig {
    /// Defaults with `min_len = max(2, patch_size)`.
    pub fn for_patch(patch_size: usize) -> Self {
        DegradationConfig {
            min_len: patch_size.max(2),
            ..Default::default()
        }
    }

    /// All probability mass on one kind.
    pub fn only(mut self, kind: OutlierKind, prob: f64) -> Self {
        self.p_soft = 0.0;
        self.p_uniform = 0.0;
        self.p_peak = 0.0;
        self.p_length = 0.0;
        *self.prob_mut(kind) = prob;
        self
    }

    pub fn prob(&self, kind: OutlierKind) -> f64 {
        match kind {
            OutlierKind::Soft => self.p_soft,
            OutlierKind::Uniform => self.p_uniform,
            OutlierKind::Peak => self.p_peak,
            OutlierKind::Length => self.p_length,
        }
    }

    fn prob_mut(&mut self, kind: OutlierKind) -> &mut f64 {
        match kind {
            OutlierKind::Soft => &mut self.p_soft,
            OutlierKind::Uniform => &mut self.p_uniform,
            OutlierKind::Peak => &mut self.p_peak,
            OutlierKind::Length => &mut self.p_length,
        }
    }

    pub fn total_prob(&self) -> f64 {
        OutlierKind::ALL.iter().map(|&k| self.prob(k)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for k in OutlierKind::ALL {
            let p = self.prob(k);
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability of {k} is {p}"));
            }
        }
        if self.total_prob() > 1.0 + 1e-12 {
            return bad(format!("outlier probabilities sum to {}", self.total_prob()));
        }
        if !(self.max_len_frac > 0.0 && self.max_len_frac <= 1.0) {
            return bad(format!("max_len_frac {} outside (0, 1]", self.max_len_frac));
        }
        if self.min_len == 0 {
            return bad("min_len must be positive".into());
        }
        if !(self.column_rate > 0.0 && self.column_rate <= 1.0) {
            return bad(format!("column_rate {} outside (0, 1]", self.column_rate));
        }
        let (lo, hi) = self.soft_weight_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!("soft weight range [{lo}, {hi}] not inside [0, 1]"));
        }
        let (lo, hi) = self.peak_scale_range;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return bad(format!("peak scale range [{lo}, {hi}] invalid"));
        }
        if !(0.0..=1.0).contains(&self.length_mode_prob) {
            return bad(format!("length_mode_prob {}", self.length_mode_prob));
        }
        Ok(())
    }
}

/// Inclusive interval `[start, end]` of timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

/// A window after degradation; `values` is row-major `N×D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradedWindow {
    pub values: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<u8>,
    pub interval: Option<Interval>,
    pub kind: Option<OutlierKind>,
    pub columns: Vec<usize>,
}

impl DegradedWindow {
    fn labeled(values: Vec<f64>, dim: usize, interval: Interval, kind: OutlierKind, columns: &[usize]) -> Self {
        let n = values.len() / dim;
        let labels = (0..n).map(|t| u8::from(interval.contains(t))).collect();
        DegradedWindow {
            values,
            dim,
            labels,
            interval: Some(interval),
            kind: Some(kind),
            columns: columns.to_vec(),
        }
    }

    fn clean(window: &[f64], dim: usize) -> Self {
        DegradedWindow {
            values: window.to_vec(),
            dim,
            labels: vec![0; window.len() / dim],
            interval: None,
            kind: None,
            columns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn check_window(window: &[f64], dim: usize, interval: Interval, columns: &[usize]) -> Result<usize> {
    if dim == 0 || window.len() % dim != 0 {
        return Err(Error::shape("degrade", format!("{} values for width {dim}", window.len())));
    }
    let n = window.len() / dim;
    if interval.start > interval.end || interval.end >= n {
        return Err(Error::shape(
            "degrade",
            format!("interval {interval:?} outside window of {n}"),
        ));
    }
    if let Some(&c) = columns.iter().find(|&&c| c >= dim) {
        return Err(Error::shape("degrade", format!("column {c} of {dim}")));
    }
    Ok(n)
}

/// Interval of uniform length in `[min_len, ⌊max_len_frac·n⌋]` at a
/// uniform valid start.
pub fn choose_interval(n: usize, cfg: &DegradationConfig, rng: &mut impl Rng) -> Result<Interval> {
    let max_len = ((cfg.max_len_frac * n as f64).floor() as usize).min(n);
    if cfg.min_len == 0 || cfg.min_len > max_len {
        return Err(Error::Config(format!(
            "min_len {} exceeds the longest interval {max_len} of a {n}-step window",
            cfg.min_len
        )));
    }
    let len = rng.random_range(cfg.min_len..=max_len);
    let start = rng.random_range(0..=n - len);
    Ok(Interval {
        start,
        end: start + len - 1,
    })
}

/// Independent Bernoulli draw per column; an empty draw is retried once
/// and then replaced by a single uniformly chosen column.
pub fn choose_columns(d: usize, rate: f64, rng: &mut impl Rng) -> Vec<usize> {
    for _ in 0..2 {
        let cols: Vec<usize> = (0..d).filter(|_| rng.random_bool(rate.clamp(0.0, 1.0))).collect();
        if !cols.is_empty() {
            return cols;
        }
    }
    vec![rng.random_range(0..d)]
}

/// `x ← (1 − λ)·x + λ·external` on the interval of the chosen columns.
/// `external` holds `interval.len()` rows of the same width as the window.
pub fn soft_replacement(
    window: &[f64],
    dim: usize,
    external: &[f64],
    interval: Interval,
    columns: &[usize],
    weight: f64,
) -> Result<DegradedWindow> {
    check_window(window, dim, interval, columns)?;
    if external.len() != interval.len() * dim {
        return Err(Error::shape(
            "soft_replacement",
            format!(
                "external segment of {} values for interval of {} rows",
                external.len(),
                interval.len()
            ),
        ));
    }
    let mut values = window.to_vec();
    for (i, t) in (interval.start..=interval.end).enumerate() {
        for &c in columns {
            let x = &mut values[t * dim + c];
            *x = (1.0 - weight) * *x + weight * external[i * dim + c];
        }
    }
    Ok(DegradedWindow::labeled(values, dim, interval, OutlierKind::Soft, columns))
}

/// Holds every chosen column at its value at the interval start.
pub fn uniform_replacement(window: &[f64], dim: usize, interval: Interval, columns: &[usize]) -> Result<DegradedWindow> {
    check_window(window, dim, interval, columns)?;
    let mut values = window.to_vec();
    for &c in columns {
        let held = window[interval.start * dim + c];
        for t in interval.start..=interval.end {
            values[t * dim + c] = held;
        }
    }
    Ok(DegradedWindow::labeled(values, dim, interval, OutlierKind::Uniform, columns))
}

/// Adds `±s·range(column)` at one random timestamp of the interval; the
/// label collapses to that timestamp.
pub fn peak_noise(
    window: &[f64],
    dim: usize,
    interval: Interval,
    columns: &[usize],
    scale_range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<DegradedWindow> {
    let n = check_window(window, dim, interval, columns)?;
    let at = rng.random_range(interval.start..=interval.end);
    let mut values = window.to_vec();
    for &c in columns {
        let (lo, hi) = (0..n)
            .map(|t| window[t * dim + c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let range = (hi - lo).max(1e-8);
        let s = if scale_range.0 == scale_range.1 {
            scale_range.0
        } else {
            rng.random_range(scale_range.0..=scale_range.1)
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        values[at * dim + c] += sign * s * range;
    }
    let point = Interval { start: at, end: at };
    Ok(DegradedWindow::labeled(values, dim, point, OutlierKind::Peak, columns))
}

/// Stretches (each of the first ⌈L/2⌉ interval points repeated twice) or
/// shortens (every second point of the 2L points ending at the interval
/// end). Falls back to [`uniform_replacement`] when the interval is shorter
/// than two points or lacks 2L points of history.
pub fn length_adjustment(
    window: &[f64],
    dim: usize,
    interval: Interval,
    columns: &[usize],
    stretch_prob: f64,
    rng: &mut impl Rng,
) -> Result<DegradedWindow> {
    check_window(window, dim, interval, columns)?;
    let len = interval.len();
    let stretch = rng.random_bool(stretch_prob.clamp(0.0, 1.0));
    let fits = len >= 2 && (stretch || interval.end + 1 >= 2 * len);
    if !fits {
        log::debug!("length adjustment does not fit {interval:?}; holding values instead");
        let mut out = uniform_replacement(window, dim, interval, columns)?;
        out.kind = Some(OutlierKind::Length);
        return Ok(out);
    }
    let mut values = window.to_vec();
    for i in 0..len {
        let src = if stretch {
            interval.start + i / 2
        } else {
            interval.end + 1 - 2 * len + 2 * i
        };
        for &c in columns {
            values[(interval.start + i) * dim + c] = window[src * dim + c];
        }
    }
    Ok(DegradedWindow::labeled(values, dim, interval, OutlierKind::Length, columns))
}

/// Draws an outlier kind (or none) from the configured probabilities and
/// applies it to `window`, a row-major slice of `training`'s width.
pub fn degrade(
    window: &[f64],
    training: &TimeSeries,
    cfg: &DegradationConfig,
    rng: &mut impl Rng,
) -> Result<DegradedWindow> {
    let dim = training.dim();
    if window.len() % dim != 0 || window.is_empty() {
        return Err(Error::shape("degrade", format!("{} values for width {dim}", window.len())));
    }
    let n = window.len() / dim;

    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut kind = None;
    for k in OutlierKind::ALL {
        acc += cfg.prob(k);
        if u < acc {
            kind = Some(k);
            break;
        }
    }
    let Some(kind) = kind else {
        return Ok(DegradedWindow::clean(window, dim));
    };

    let interval = choose_interval(n, cfg, rng)?;
    let columns = choose_columns(dim, cfg.column_rate, rng);
    match kind {
        OutlierKind::Soft => {
            let (lo, hi) = cfg.soft_weight_range;
            let weight = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let start = sample_start(training, interval.len(), rng)?;
            let external = training.rows(start, interval.len());
            soft_replacement(window, dim, external, interval, &columns, weight)
        }
        OutlierKind::Uniform => uniform_replacement(window, dim, interval, &columns),
        OutlierKind::Peak => peak_noise(window, dim, interval, &columns, cfg.peak_scale_range, rng),
        OutlierKind::Length => {
            length_adjustment(window, dim, interval, &columns, cfg.length_mode_prob, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn iv(start: usize, end: usize) -> Interval {
        Interval { start, end }
    }

    #[test]
    fn interval_respects_cap() {
        let cfg = DegradationConfig::default();
        let mut r = rng(0);
        for _ in 0..5000 {
            let i = choose_interval(100, &cfg, &mut r).unwrap();
            assert!(i.len() <= 20 && i.len() >= 2 && i.end < 100);
        }
    }

    #[test]
    fn fixed_length_when_min_equals_max() {
        let cfg = DegradationConfig {
            min_len: 20,
            ..Default::default()
        };
        let mut r = rng(1);
        for _ in 0..200 {
            assert_eq!(choose_interval(100, &cfg, &mut r).unwrap().len(), 20);
        }
        let too_long = DegradationConfig {
            min_len: 21,
            ..Default::default()
        };
        assert!(choose_interval(100, &too_long, &mut r).is_err());
    }

    #[test]
    fn columns_never_empty() {
        let mut r = rng(2);
        assert_eq!(choose_columns(5, 1.0, &mut r), vec![0, 1, 2, 3, 4]);
        for _ in 0..1000 {
            assert!(!choose_columns(3, 0.01, &mut r).is_empty());
        }
    }

    #[test]
    fn soft_replacement_weights() {
        let w = vec![0.0; 10];
        let ext = vec![2.0; 3];
        let full = soft_replacement(&w, 1, &ext, iv(2, 4), &[0], 1.0).unwrap();
        assert_eq!(&full.values[2..5], &[2.0, 2.0, 2.0]);
        let none = soft_replacement(&w, 1, &ext, iv(2, 4), &[0], 0.0).unwrap();
        assert_eq!(none.values, w);
        assert_eq!(none.labels.iter().filter(|&&l| l == 1).count(), 3);
        let half = soft_replacement(&w, 1, &ext, iv(2, 4), &[0], 0.5).unwrap();
        assert_eq!(&half.values[2..5], &[1.0, 1.0, 1.0]);
        assert!(soft_replacement(&w, 1, &ext[..2], iv(2, 4), &[0], 0.5).is_err());
    }

    #[test]
    fn uniform_replacement_holds_first_value() {
        let ramp = [0.0, 1.0, 2.0, 3.0, 4.0];
        let out = uniform_replacement(&ramp, 1, iv(1, 3), &[0]).unwrap();
        assert_eq!(out.values, vec![0.0, 1.0, 1.0, 1.0, 4.0]);
        assert_eq!(out.labels, vec![0, 1, 1, 1, 0]);

        let flat = [7.0; 5];
        let out = uniform_replacement(&flat, 1, iv(0, 2), &[0]).unwrap();
        assert_eq!(out.values, flat.to_vec());
        assert_eq!(out.labels, vec![1, 1, 1, 0, 0]);
    }

    #[test]
    fn peak_noise_single_point() {
        let w: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let out = peak_noise(&w, 1, iv(5, 12), &[0], (0.5, 2.0), &mut rng(3)).unwrap();
        assert_eq!(out.labels.iter().filter(|&&l| l == 1).count(), 1);
        let at = out.interval.unwrap().start;
        assert!((5..=12).contains(&at));
        for t in 0..20 {
            if t != at {
                assert_eq!(out.values[t], w[t]);
            }
        }
        assert_ne!(out.values[at], w[at]);
    }

    #[test]
    fn peak_noise_range_floor() {
        let w = vec![0.0; 8];
        let out = peak_noise(&w, 1, iv(2, 5), &[0], (1.0, 1.0), &mut rng(4)).unwrap();
        let at = out.interval.unwrap().start;
        assert_eq!(out.values[at].abs(), 1e-8);
    }

    #[test]
    fn stretch_and_shorten() {
        // values a..h = 0..8, interval covers the last four points
        let w: Vec<f64> = (0..8).map(f64::from).collect();
        let s = length_adjustment(&w, 1, iv(4, 7), &[0], 1.0, &mut rng(5)).unwrap();
        assert_eq!(&s.values[4..], &[4.0, 4.0, 5.0, 5.0]);
        assert_eq!(&s.values[..4], &w[..4]);

        let sh = length_adjustment(&w, 1, iv(4, 7), &[0], 0.0, &mut rng(6)).unwrap();
        assert_eq!(&sh.values[4..], &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(&sh.values[..4], &w[..4]);
        assert_eq!(sh.kind, Some(OutlierKind::Length));
    }

    #[test]
    fn shorten_without_history_falls_back() {
        let w: Vec<f64> = (0..8).map(f64::from).collect();
        let out = length_adjustment(&w, 1, iv(1, 4), &[0], 0.0, &mut rng(7)).unwrap();
        assert_eq!(&out.values[1..5], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(out.labels, vec![0, 1, 1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn zero_probabilities_leave_window_untouched() {
        let train = TimeSeries::univariate("t", (0..200).map(|i| (i as f64 * 0.1).sin()).collect()).unwrap();
        let cfg = DegradationConfig::default().only(OutlierKind::Soft, 0.0);
        let w = train.rows(10, 50).to_vec();
        let out = degrade(&w, &train, &cfg, &mut rng(8)).unwrap();
        assert_eq!(out.values, w);
        assert!(out.labels.iter().all(|&l| l == 0));
        assert!(out.interval.is_none());
    }

    #[test]
    fn config_validation() {
        DegradationConfig::default().validate().unwrap();
        let mut c = DegradationConfig::default();
        c.p_soft = 0.9;
        assert!(c.validate().is_err());
        let mut c = DegradationConfig::default();
        c.column_rate = 0.0;
        assert!(c.validate().is_err());
        assert!((DegradationConfig::default().total_prob() - 0.9).abs() < 1e-12);
        assert_eq!(DegradationConfig::for_patch(14).min_len, 14);
    }
}
