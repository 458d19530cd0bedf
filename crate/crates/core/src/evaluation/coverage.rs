use rand::Rng;

use super::metrics::{auroc, best_f1_search};
use super::sliding::{sliding_scores, DEFAULT_STRIDE};
use crate::data::{NormStats, SineDataset, TypicalKind};
use crate::degradation::{DegradationConfig, OutlierKind};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::scalar::Scalar;
use crate::training::{substream, train, TrainConfig};

/// Both F1 and AUROC must exceed this for a kind to cover a slice.
pub const COVER_THRESHOLD: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct CoverageSetup {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Interval and shape parameters; the kind probabilities are replaced.
    pub degradation: DegradationConfig,
    /// Probability given to the single active kind.
    pub total_prob: f64,
    pub stride: usize,
}

impl CoverageSetup {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        let degradation = DegradationConfig::for_patch(model.patch_size);
        CoverageSetup {
            model,
            train,
            total_prob: degradation.total_prob(),
            degradation,
            stride: DEFAULT_STRIDE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageCell {
    pub synthetic: OutlierKind,
    pub typical: TypicalKind,
    pub f1: f64,
    pub auroc: f64,
    pub covered: bool,
    /// Mean score over anomalous timestamps divided by the mean over normal ones.
    pub score_ratio: f64,
}

impl CoverageCell {
    pub const CSV_HEADER: &'static str = "synthetic,typical,f1,auroc,covered,score_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.synthetic, self.typical, self.f1, self.auroc, self.covered, self.score_ratio
        )
    }

    pub fn evaluate(synthetic: OutlierKind, typical: TypicalKind, scores: &[f64], labels: &[u8]) -> Result<Self> {
        let (_, f1) = best_f1_search(scores, labels, false)?;
        let auroc = auroc(scores, labels)?;
        let (mut pos, mut neg, mut np, mut nn) = (0.0, 0.0, 0usize, 0usize);
        for (&s, &l) in scores.iter().zip(labels) {
            if l != 0 {
                pos += s;
                np += 1;
            } else {
                neg += s;
                nn += 1;
            }
        }
        let score_ratio = (pos / np as f64) / (neg / nn as f64);
        Ok(CoverageCell {
            synthetic,
            typical,
            f1,
            auroc,
            covered: f1 > COVER_THRESHOLD && auroc > COVER_THRESHOLD,
            score_ratio,
        })
    }
}

/// Scores every typical slice with an already trained model.
pub fn evaluate_slices<T: Scalar>(
    synthetic: OutlierKind,
    params: &ModelParams<T>,
    data: &SineDataset,
    stats: &NormStats,
    stride: usize,
) -> Result<Vec<CoverageCell>> {
    data.tests
        .iter()
        .map(|(typical, series)| {
            let labels = series
                .labels()
                .ok_or_else(|| Error::Data(format!("{typical} slice has no labels")))?;
            let scores = sliding_scores(params, &stats.apply(series)?, stride)?;
            CoverageCell::evaluate(synthetic, *typical, &scores.scores, labels)
        })
        .collect()
}

/// Trains one model with only `synthetic` outliers and scores every slice.
pub fn coverage_row<T: Scalar>(
    synthetic: OutlierKind,
    data: &SineDataset,
    setup: &CoverageSetup,
) -> Result<Vec<CoverageCell>> {
    let stats = NormStats::fit(&data.train)?;
    let train_data = stats.apply(&data.train)?;
    let degradation = setup.degradation.clone().only(synthetic, setup.total_prob);
    let out = train::<T>(&setup.model, &train_data, &setup.train, &degradation)?;
    log::info!(
        "{synthetic}: trained {} steps, final loss {:?}",
        out.optimizer.step,
        out.log.entries.last().map(|e| e.loss)
    );
    evaluate_slices(synthetic, &out.params, data, &stats, setup.stride)
}

/// Seed of the run for `synthetic`, derived from the master seed.
pub fn row_seed(master: u64, synthetic: OutlierKind) -> u64 {
    let idx = OutlierKind::ALL.iter().position(|&k| k == synthetic).unwrap_or(0) as u64;
    substream(master, u64::MAX - 1, idx).random()
}

/// One row per synthetic kind, five cells per row.
pub fn coverage_matrix<T: Scalar>(
    data: &SineDataset,
    kinds: &[OutlierKind],
    setup: &CoverageSetup,
) -> Result<Vec<CoverageCell>> {
    let mut cells = Vec::new();
    for &kind in kinds {
        let mut s = setup.clone();
        s.train.seed = row_seed(setup.train.seed, kind);
        cells.extend(coverage_row::<T>(kind, data, &s)?);
    }
    Ok(cells)
}
