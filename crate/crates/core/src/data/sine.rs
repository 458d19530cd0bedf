//! Noised sine wave with one clean training slice and five test slices,
//! each carrying a single kind of injected anomaly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypicalKind {
    Global,
    Contextual,
    Shapelet,
    Seasonal,
    Trend,
}

impl TypicalKind {
    pub const ALL: [TypicalKind; 5] = [
        TypicalKind::Global,
        TypicalKind::Contextual,
        TypicalKind::Shapelet,
        TypicalKind::Seasonal,
        TypicalKind::Trend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TypicalKind::Global => "global",
            TypicalKind::Contextual => "contextual",
            TypicalKind::Shapelet => "shapelet",
            TypicalKind::Seasonal => "seasonal",
            TypicalKind::Trend => "trend",
        }
    }

    fn is_point(self) -> bool {
        matches!(self, TypicalKind::Global | TypicalKind::Contextual)
    }
}

impl fmt::Display for TypicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TypicalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TypicalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown anomaly type {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SineConfig {
    /// Samples per sine cycle.
    pub period: usize,
    pub amplitude: f64,
    pub noise_std: f64,
    pub train_len: usize,
    /// Length of every test slice.
    pub test_len: usize,
    /// Target fraction of labeled timestamps per test slice.
    pub anomaly_rate: f64,
    /// Length of each shapelet, seasonal and trend subsequence.
    pub pattern_len: usize,
    /// Global outliers sit at ±(global_offset + U[0, 1])·amplitude.
    pub global_offset: f64,
    /// Minimum distance of a contextual outlier from the local sine value,
    /// in units of amplitude. Never below four noise deviations.
    pub contextual_offset: f64,
    /// Final height of the trend ramp, in units of amplitude.
    pub trend_height: f64,
    pub seed: u64,
}

impl Default for SineConfig {
    fn default() -> Self {
        SineConfig {
            period: 50,
            amplitude: 1.0,
            noise_std: 0.05,
            train_len: 20_000,
            test_len: 2_000,
            anomaly_rate: 0.05,
            pattern_len: 25,
            global_offset: 3.0,
            contextual_offset: 0.5,
            trend_height: 2.0,
            seed: 0,
        }
    }
}

impl SineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.period < 4 {
            return bad(format!("sine.period {} is below 4", self.period));
        }
        if self.train_len < 10 * self.period {
            return bad(format!(
                "sine.train_len {} is shorter than ten periods",
                self.train_len
            ));
        }
        if !(self.amplitude > 0.0) || !(self.noise_std >= 0.0) {
            return bad("sine.amplitude must be positive and sine.noise_std nonnegative".into());
        }
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 0.5) {
            return bad(format!("sine.anomaly_rate {} outside (0, 0.5)", self.anomaly_rate));
        }
        if self.pattern_len < 2 || self.test_len < 4 * self.pattern_len {
            return bad("sine.pattern_len must be ≥ 2 and fit four times in a test slice".into());
        }
        if self.global_offset < 3.0 {
            return bad("sine.global_offset must be at least 3".into());
        }
        let dev = self.contextual_offset * self.amplitude;
        if dev < 4.0 * self.noise_std || self.contextual_offset > 1.0 {
            return bad(format!(
                "sine.contextual_offset {} must lie in [4·noise_std/amplitude, 1]",
                self.contextual_offset
            ));
        }
        let points = self.point_count();
        if points == 0 || self.test_len / points < 5 {
            return bad("sine.anomaly_rate leaves no room for isolated points".into());
        }
        if self.pattern_count() == 0 {
            return bad("sine.anomaly_rate too small for one pattern".into());
        }
        Ok(())
    }

    fn point_count(&self) -> usize {
        (self.anomaly_rate * self.test_len as f64).round() as usize
    }

    fn pattern_count(&self) -> usize {
        (self.anomaly_rate * self.test_len as f64 / self.pattern_len as f64).round() as usize
    }

    fn clean(&self, t: usize) -> f64 {
        self.amplitude * (2.0 * PI * t as f64 / self.period as f64).sin()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SineDataset {
    pub train: TimeSeries,
    /// One labeled slice per [`TypicalKind`], in [`TypicalKind::ALL`] order.
    pub tests: Vec<(TypicalKind, TimeSeries)>,
}

impl SineDataset {
    pub fn test(&self, kind: TypicalKind) -> &TimeSeries {
        &self.tests.iter().find(|(k, _)| *k == kind).expect("all kinds generated").1
    }
}

pub fn generate_sine_dataset(cfg: &SineConfig) -> Result<SineDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;

    let train_vals: Vec<f64> = (0..cfg.train_len)
        .map(|t| cfg.clean(t) + noise.sample(&mut rng))
        .collect();
    let train = TimeSeries::univariate("train", train_vals)?;

    let mut tests = Vec::with_capacity(5);
    for (k, kind) in TypicalKind::ALL.into_iter().enumerate() {
        let t0 = cfg.train_len + k * cfg.test_len;
        let mut vals: Vec<f64> = (0..cfg.test_len)
            .map(|i| cfg.clean(t0 + i) + noise.sample(&mut rng))
            .collect();
        let mut labels = vec![0u8; cfg.test_len];
        if kind.is_point() {
            inject_points(cfg, kind, t0, &mut vals, &mut labels, &mut rng);
        } else {
            inject_patterns(cfg, kind, t0, &mut vals, &mut labels, &mut noise.clone(), &mut rng);
        }
        let series = TimeSeries::univariate(format!("test_{}", kind.name()), vals)?.with_labels(labels)?;
        tests.push((kind, series));
    }
    Ok(SineDataset { train, tests })
}

/// One isolated point per equal-width block, kept two samples away from the
/// block edges.
fn inject_points(
    cfg: &SineConfig,
    kind: TypicalKind,
    t0: usize,
    vals: &mut [f64],
    labels: &mut [u8],
    rng: &mut ChaCha8Rng,
) {
    let count = cfg.point_count();
    let block = cfg.test_len / count;
    let a = cfg.amplitude;
    for b in 0..count {
        let pos = b * block + rng.random_range(2..block - 2);
        let v = match kind {
            TypicalKind::Global => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * (cfg.global_offset + rng.random::<f64>()) * a
            }
            _ => {
                let local = cfg.clean(t0 + pos);
                let dev = (cfg.contextual_offset * a).max(4.0 * cfg.noise_std);
                loop {
                    let v = rng.random_range(-a..=a);
                    if (v - local).abs() >= dev {
                        break v;
                    }
                }
            }
        };
        vals[pos] = v;
        labels[pos] = 1;
    }
}

fn inject_patterns(
    cfg: &SineConfig,
    kind: TypicalKind,
    t0: usize,
    vals: &mut [f64],
    labels: &mut [u8],
    noise: &mut Normal<f64>,
    rng: &mut ChaCha8Rng,
) {
    let count = cfg.pattern_count();
    let block = cfg.test_len / count;
    let len = cfg.pattern_len;
    let a = cfg.amplitude;
    let p = cfg.period as f64;
    for b in 0..count {
        let lo = b * block + len.min(block / 4);
        let hi = (b + 1) * block - len - len.min(block / 4);
        let start = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        for i in 0..len {
            let pos = start + i;
            let t = (t0 + pos) as f64;
            let e = noise.sample(rng);
            vals[pos] = match kind {
                // anti-phase so no labeled point coincides with the clean peaks
                TypicalKind::Shapelet => -a * (2.0 * PI * t / p).sin().signum() + e,
                TypicalKind::Seasonal => a * (4.0 * PI * t / p).sin() + e,
                _ => vals[pos] + cfg.trend_height * a * (i + 1) as f64 / len as f64,
            };
            labels[pos] = 1;
        }
    }
}
