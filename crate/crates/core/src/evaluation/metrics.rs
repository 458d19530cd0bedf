use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// Pointwise `(TP, FP, FN)`.
pub fn confusion(labels: &[u8], preds: &[u8]) -> Result<(u64, u64, u64)> {
    check_len("confusion", labels.len(), preds.len())?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&l, &p) in labels.iter().zip(preds) {
        match (l != 0, p != 0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok((tp, fp, fn_))
}

/// `2TP / (2TP + FP + FN)`, zero when nothing is positive.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        (2 * tp) as f64 / den as f64
    }
}

/// Maximal runs of label 1 as half-open ranges.
pub fn label_segments(labels: &[u8]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push(s..t);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..labels.len());
    }
    out
}

/// Marks a whole anomalous segment detected when any point in it is.
pub fn point_adjust(labels: &[u8], preds: &[u8]) -> Result<Vec<u8>> {
    check_len("point_adjust", labels.len(), preds.len())?;
    let mut out = preds.to_vec();
    for seg in label_segments(labels) {
        if preds[seg.clone()].iter().any(|&p| p != 0) {
            out[seg].fill(1);
        }
    }
    Ok(out)
}

/// Predictions `score >= threshold`.
pub fn threshold(scores: &[f64], theta: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= theta)).collect()
}

/// Best F1 over every distinct score used as threshold, plus `+inf`.
///
/// Returns `(threshold, f1)`; among equal F1 values the larger threshold wins.
pub fn best_f1_search(scores: &[f64], labels: &[u8], adjust: bool) -> Result<(f64, f64)> {
    check_len("best_f1_search", scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(Error::Data("best_f1_search on empty input".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { op: "best_f1_search" });
    }
    let positives = labels.iter().filter(|&&l| l != 0).count() as u64;
    if positives == 0 {
        return Err(Error::Data("best_f1_search needs at least one positive label".into()));
    }

    // (score, tp gained, fp gained) once the threshold drops to `score`
    let mut events: Vec<(f64, u64, u64)> = Vec::with_capacity(scores.len());
    if adjust {
        let mut in_segment = vec![false; scores.len()];
        for seg in label_segments(labels) {
            let peak = scores[seg.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            events.push((peak, seg.len() as u64, 0));
            in_segment[seg].fill(true);
        }
        for (t, &s) in scores.iter().enumerate() {
            if !in_segment[t] {
                events.push((s, 0, 1));
            } else {
                // every score is a candidate even when it is not a segment maximum
                events.push((s, 0, 0));
            }
        }
    } else {
        events.extend(scores.iter().zip(labels).map(|(&s, &l)| (s, u64::from(l != 0), u64::from(l == 0))));
    }
    events.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let (mut best_theta, mut best) = (f64::INFINITY, 0.0);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < events.len() {
        let theta = events[i].0;
        while i < events.len() && events[i].0 == theta {
            tp += events[i].1;
            fp += events[i].2;
            i += 1;
        }
        let v = f1(tp, fp, positives - tp);
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    Ok((best_theta, best))
}

/// Area under the ROC curve via the rank statistic, ties counted as one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_len("auroc", scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { op: "auroc" });
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("auroc needs both positive and negative labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // sum of (midrank - 1) over positives, in doubled units to stay integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let twice_mid = (i + j - 1) as u128;
        let p = idx[i..j].iter().filter(|&&k| labels[k] != 0).count() as u128;
        twice_rank_sum += p * twice_mid;
        i = j;
    }
    let (p, n) = (pos as u128, neg as u128);
    let twice_u = twice_rank_sum - p * (p - 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub f1: f64,
    pub threshold_f1: f64,
    pub f1_pa: f64,
    pub threshold_pa: f64,
    pub auroc: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "tp,fp,fn,f1,threshold_f1,f1_pa,threshold_pa,auroc";

    /// Independent best-threshold searches with and without point adjustment.
    /// The confusion counts belong to the plain F1 threshold.
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let (threshold_f1, f1v) = best_f1_search(scores, labels, false)?;
        let (threshold_pa, f1_pa) = best_f1_search(scores, labels, true)?;
        let (tp, fp, fn_) = confusion(labels, &threshold(scores, threshold_f1))?;
        Ok(MetricReport {
            tp,
            fp,
            fn_,
            f1: f1v,
            threshold_f1,
            f1_pa,
            threshold_pa,
            auroc: auroc(scores, labels)?,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.tp, self.fp, self.fn_, self.f1, self.threshold_f1, self.f1_pa, self.threshold_pa, self.auroc
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}
