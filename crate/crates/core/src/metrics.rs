//! Confusion-derived metrics, rank-based ROC/AUC, and per-sample prediction
//! timing.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, LabelVector};
use crate::error::{Error, Result};
use crate::model::{ScoreVector, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// One evaluation run's metric bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Recall on the attack class (detection rate).
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Fraction of benign samples classified as attack.
    pub far: f64,
    pub auc: f64,
    pub prediction_time_us: f64,
    pub n_features: usize,
    pub classifier: String,
    pub selection: String,
    /// Set when a 0/0 metric was coerced to 0.
    pub degenerate: bool,
}

impl Default for MetricsReport {
    fn default() -> Self {
        MetricsReport {
            accuracy: 0.0,
            recall: 0.0,
            precision: 0.0,
            f1: 0.0,
            far: 0.0,
            auc: 0.0,
            prediction_time_us: 0.0,
            n_features: 0,
            classifier: String::new(),
            selection: "full".into(),
            degenerate: false,
        }
    }
}

/// Thresholded confusion counts; prediction = 1 iff score >= threshold.
pub fn confusion(
    y_true: &LabelVector,
    scores: &ScoreVector,
    threshold: f64,
) -> Result<ConfusionCounts> {
    if y_true.len() != scores.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            found: scores.len(),
        });
    }
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (i, &s) in scores.as_slice().iter().enumerate() {
        let pred = s >= threshold;
        match (y_true.get(i) == 1, pred) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Fills the confusion-derived rows of the report. Any 0/0 ratio is defined
/// as 0 and flips the degenerate flag.
pub fn classification_metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let n = c.total();
    if n == 0 {
        return Err(Error::Empty("no samples to evaluate"));
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let far = ratio(c.fp, c.fp + c.tn);
    let accuracy = (c.tp + c.tn) as f64 / n as f64;
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        accuracy,
        recall,
        precision,
        f1,
        far,
        degenerate,
        ..MetricsReport::default()
    })
}

/// Rank-based (Mann-Whitney) AUC with midrank tie handling:
/// P(score_pos > score_neg) + 0.5 * P(tie). Only the ordering of the scores
/// matters, so any real-valued scores are accepted.
pub fn roc_auc(y_true: &LabelVector, scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            found: scores.len(),
        });
    }
    let n = y_true.len();
    let n_pos = y_true.positive_count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // midranks over tie groups, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if y_true.get(idx) == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Predicts the whole table once and returns the per-sample wall-clock time
/// in microseconds. Scores are bit-identical to the untimed path.
pub fn timed_predict(model: &TrainedModel, x: &FeatureTable) -> Result<(ScoreVector, f64)> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("cannot time prediction on an empty table"));
    }
    let start = std::time::Instant::now();
    let scores = model.predict(x)?;
    let elapsed = start.elapsed();
    let per_sample_us = elapsed.as_secs_f64() * 1e6 / x.n_rows() as f64;
    Ok((scores, per_sample_us))
}
