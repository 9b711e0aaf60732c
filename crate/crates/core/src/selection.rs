//! Filter-style feature scoring: chi-square, information gain (histogram
//! mutual information), and absolute Pearson correlation, plus deterministic
//! ranking.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ChiSquare,
    InformationGain,
    Correlation,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::ChiSquare,
        Algorithm::InformationGain,
        Algorithm::Correlation,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::ChiSquare => "chi_square",
            Algorithm::InformationGain => "information_gain",
            Algorithm::Correlation => "correlation",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chi_square" | "chi2" | "chi" => Ok(Algorithm::ChiSquare),
            "information_gain" | "ig" => Ok(Algorithm::InformationGain),
            "correlation" | "cor" | "corr" => Ok(Algorithm::Correlation),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature_index: usize,
    pub feature_name: String,
    pub score: f64,
}

/// Scores plus the descending rank order (ties broken by ascending index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub algorithm: Algorithm,
    pub scores: Vec<FeatureScore>,
    pub order: Vec<usize>,
}

impl FeatureRanking {
    /// Original column indices of the top-k features. The returned set is a
    /// prefix of `order`, so top-k is always contained in top-(k+1).
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.order[..k.min(self.order.len())].to_vec()
    }
}

fn check_both_classes(y: &LabelVector) -> Result<()> {
    if !y.has_both_classes() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Chi-square score in the feature-mass contingency form: per class,
/// observed = class-summed feature values, expected = class share of the
/// total mass. A zero-mass feature scores 0.
pub fn chi_square_scores(x: &FeatureTable, y: &LabelVector) -> Result<Vec<FeatureScore>> {
    check_both_classes(y)?;
    let n = x.n_rows();
    let n_pos = y.positive_count();
    let class_frac = [(n - n_pos) as f64 / n as f64, n_pos as f64 / n as f64];

    let mut out = Vec::with_capacity(x.n_features());
    for j in 0..x.n_features() {
        let mut observed = [0.0f64; 2];
        for (i, v) in x.column(j).enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeFeature {
                    row: i,
                    column: j,
                    value: v,
                });
            }
            observed[y.get(i) as usize] += v;
        }
        let total = observed[0] + observed[1];
        let score = if total == 0.0 {
            0.0
        } else {
            (0..2)
                .map(|k| {
                    let expected = class_frac[k] * total;
                    let diff = observed[k] - expected;
                    diff * diff / expected
                })
                .sum()
        };
        out.push(FeatureScore {
            feature_index: j,
            feature_name: x.feature_names[j].clone(),
            score,
        });
    }
    Ok(out)
}

/// Chi-square on a binned 2×bins contingency table of row counts. Variant of
/// [`chi_square_scores`] for sensitivity runs.
pub fn chi_square_scores_binned(
    x: &FeatureTable,
    y: &LabelVector,
    bins: usize,
) -> Result<Vec<FeatureScore>> {
    check_both_classes(y)?;
    if bins < 2 {
        return Err(Error::Config(format!("bins = {bins}, need >= 2")));
    }
    let n = x.n_rows();
    let n_pos = y.positive_count();
    let class_count = [(n - n_pos) as f64, n_pos as f64];

    let mut out = Vec::with_capacity(x.n_features());
    for j in 0..x.n_features() {
        let assigned = bin_column(x, j, bins);
        let mut counts = vec![[0.0f64; 2]; bins];
        for (i, &b) in assigned.iter().enumerate() {
            counts[b][y.get(i) as usize] += 1.0;
        }
        let mut score = 0.0;
        for cell in &counts {
            let bin_total = cell[0] + cell[1];
            if bin_total == 0.0 {
                continue;
            }
            for k in 0..2 {
                let expected = bin_total * class_count[k] / n as f64;
                if expected > 0.0 {
                    let diff = cell[k] - expected;
                    score += diff * diff / expected;
                }
            }
        }
        out.push(FeatureScore {
            feature_index: j,
            feature_name: x.feature_names[j].clone(),
            score,
        });
    }
    Ok(out)
}

fn bin_column(x: &FeatureTable, j: usize, bins: usize) -> Vec<usize> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in x.column(j) {
        min = min.min(v);
        max = max.max(v);
    }
    let width = max - min;
    x.column(j)
        .map(|v| {
            if width == 0.0 {
                0
            } else {
                (((v - min) / width * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

fn entropy_nats(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information I(X_binned; Y) = H(Y) − H(Y|X) in nats.
/// Features are discretized into `bins` equal-width intervals over their
/// observed range; a constant feature occupies a single bin and scores 0.
pub fn information_gain_scores(
    x: &FeatureTable,
    y: &LabelVector,
    bins: usize,
) -> Result<Vec<FeatureScore>> {
    if bins < 2 {
        return Err(Error::Config(format!("bins = {bins}, need >= 2")));
    }
    let n = x.n_rows() as f64;
    let n_pos = y.positive_count() as f64;
    let label_counts = [n - n_pos, n_pos];
    let h_y = entropy_nats(&label_counts, n);

    let mut out = Vec::with_capacity(x.n_features());
    for j in 0..x.n_features() {
        let assigned = bin_column(x, j, bins);
        let mut joint = vec![[0.0f64; 2]; bins];
        for (i, &b) in assigned.iter().enumerate() {
            joint[b][y.get(i) as usize] += 1.0;
        }
        // H(Y|X) = sum_b p(b) H(Y | X = b)
        let h_y_given_x: f64 = joint
            .iter()
            .map(|cell| {
                let bin_total = cell[0] + cell[1];
                (bin_total / n) * entropy_nats(cell, bin_total)
            })
            .sum();
        let score = (h_y - h_y_given_x).max(0.0);
        out.push(FeatureScore {
            feature_index: j,
            feature_name: x.feature_names[j].clone(),
            score,
        });
    }
    Ok(out)
}

/// Absolute Pearson correlation with population (1/n) moments. A feature or
/// label with zero variance scores 0.
pub fn correlation_scores(x: &FeatureTable, y: &LabelVector) -> Result<Vec<FeatureScore>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::Empty("correlation needs at least 2 rows"));
    }
    let nf = n as f64;
    let y_mean = y.positive_count() as f64 / nf;
    let y_var: f64 = y
        .as_slice()
        .iter()
        .map(|&l| {
            let d = f64::from(l) - y_mean;
            d * d
        })
        .sum::<f64>()
        / nf;
    let y_sd = y_var.sqrt();

    let mut out = Vec::with_capacity(x.n_features());
    for j in 0..x.n_features() {
        let x_mean = x.column(j).sum::<f64>() / nf;
        let mut cov = 0.0;
        let mut x_var = 0.0;
        for (i, v) in x.column(j).enumerate() {
            let dx = v - x_mean;
            cov += dx * (f64::from(y.get(i)) - y_mean);
            x_var += dx * dx;
        }
        cov /= nf;
        x_var /= nf;
        let x_sd = x_var.sqrt();
        let score = if x_sd == 0.0 || y_sd == 0.0 {
            0.0
        } else {
            (cov / (x_sd * y_sd)).abs()
        };
        out.push(FeatureScore {
            feature_index: j,
            feature_name: x.feature_names[j].clone(),
            score,
        });
    }
    Ok(out)
}

/// Stable descending sort by score; ties break by ascending feature index.
pub fn rank_features(scores: Vec<FeatureScore>, algorithm: Algorithm) -> Result<FeatureRanking> {
    if scores.is_empty() {
        return Err(Error::Empty("cannot rank an empty score list"));
    }
    if scores.iter().any(|s| !s.score.is_finite()) {
        return Err(Error::Config("scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .score
            .partial_cmp(&scores[a].score)
            .unwrap()
            .then(scores[a].feature_index.cmp(&scores[b].feature_index))
    });
    let order = order.into_iter().map(|i| scores[i].feature_index).collect();
    Ok(FeatureRanking {
        algorithm,
        scores,
        order,
    })
}

/// Convenience: score with the given algorithm and rank.
pub fn score_and_rank(
    x: &FeatureTable,
    y: &LabelVector,
    algorithm: Algorithm,
    bins: usize,
) -> Result<FeatureRanking> {
    let scores = match algorithm {
        Algorithm::ChiSquare => chi_square_scores(x, y)?,
        Algorithm::InformationGain => information_gain_scores(x, y, bins)?,
        Algorithm::Correlation => correlation_scores(x, y)?,
    };
    rank_features(scores, algorithm)
}
