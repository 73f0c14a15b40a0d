//! Evaluation metrics: accuracy, expected calibration error, and AUROC.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch,
    EmptyInput,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch => write!(f, "input lengths differ"),
            MetricsError::EmptyInput => write!(f, "empty input"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Default number of equal-width calibration bins.
pub const DEFAULT_ECE_BINS: usize = 15;

/// Per-bin calibration statistics over equal-width, right-inclusive bins.
#[derive(Debug, Clone)]
pub struct BinnedCalibration {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean_confidence: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
}

impl BinnedCalibration {
    pub fn compute(
        confidences: &[f64],
        correct: &[bool],
        num_bins: usize,
    ) -> Result<BinnedCalibration, MetricsError> {
        if confidences.len() != correct.len() {
            return Err(MetricsError::LengthMismatch);
        }
        if confidences.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        assert!(num_bins >= 1, "need at least one bin");
        assert!(
            confidences.iter().all(|&c| (0.0..=1.0).contains(&c)),
            "confidences must lie in [0, 1]"
        );
        let mut counts = vec![0usize; num_bins];
        let mut conf_sum = vec![0.0; num_bins];
        let mut acc_sum = vec![0.0; num_bins];
        for (&c, &ok) in confidences.iter().zip(correct) {
            // Right-inclusive bins (e_b, e_{b+1}]; zero lands in the first.
            let scaled = c * num_bins as f64;
            let idx = if scaled <= 0.0 {
                0
            } else {
                let up = crate::fmath::floor(scaled) as usize;
                let on_edge = scaled == up as f64;
                (if on_edge { up - 1 } else { up }).min(num_bins - 1)
            };
            counts[idx] += 1;
            conf_sum[idx] += c;
            acc_sum[idx] += f64::from(u8::from(ok));
        }
        let edges = (0..=num_bins)
            .map(|b| b as f64 / num_bins as f64)
            .collect();
        let mean_confidence = conf_sum
            .iter()
            .zip(&counts)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        let mean_accuracy = acc_sum
            .iter()
            .zip(&counts)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        Ok(BinnedCalibration {
            edges,
            counts,
            mean_confidence,
            mean_accuracy,
        })
    }

    /// Bin-weighted |accuracy - confidence|; empty bins contribute zero.
    pub fn ece(&self) -> f64 {
        let total: usize = self.counts.iter().sum();
        let mut e = 0.0;
        for ((&n, &conf), &acc) in self
            .counts
            .iter()
            .zip(&self.mean_confidence)
            .zip(&self.mean_accuracy)
        {
            if n > 0 {
                let gap = acc - conf;
                e += (n as f64 / total as f64) * if gap < 0.0 { -gap } else { gap };
            }
        }
        e
    }
}

/// Expected calibration error over equal-width bins.
pub fn ece(confidences: &[f64], correct: &[bool], num_bins: usize) -> Result<f64, MetricsError> {
    Ok(BinnedCalibration::compute(confidences, correct, num_bins)?.ece())
}

/// Mann-Whitney AUROC with half credit for ties, computed through tie-aware
/// ranks in O((|P| + |N|) log(|P| + |N|)).
pub fn auroc(scores_positive: &[f64], scores_negative: &[f64]) -> Result<f64, MetricsError> {
    if scores_positive.is_empty() || scores_negative.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let np = scores_positive.len();
    let nn = scores_negative.len();
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(np + nn);
    all.extend(scores_positive.iter().map(|&s| (s, true)));
    all.extend(scores_negative.iter().map(|&s| (s, false)));
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Average ranks over tie groups; accumulate the positive ranks.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (np * (np + 1)) as f64 / 2.0;
    Ok(u / (np as f64 * nn as f64))
}

/// Fraction of equal entries.
pub fn accuracy(pred_labels: &[usize], true_labels: &[usize]) -> Result<f64, MetricsError> {
    if pred_labels.len() != true_labels.len() {
        return Err(MetricsError::LengthMismatch);
    }
    if pred_labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = pred_labels
        .iter()
        .zip(true_labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / pred_labels.len() as f64)
}

/// O(n^2) pair-counting AUROC, the independent oracle for [`auroc`].
pub fn auroc_brute_force(
    scores_positive: &[f64],
    scores_negative: &[f64],
) -> Result<f64, MetricsError> {
    if scores_positive.is_empty() || scores_negative.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut wins = 0.0;
    for &p in scores_positive {
        for &n in scores_negative {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (scores_positive.len() as f64 * scores_negative.len() as f64))
}
