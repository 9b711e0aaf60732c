//! Random forest: bagged Gini-impurity decision trees with per-node feature
//! subsampling. Per-tree sub-seeds keep training deterministic regardless of
//! thread count.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, LabelVector};
use crate::error::{Error, Result};
use crate::model::ScoreVector;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    /// Features sampled per node; `None` means floor(sqrt(d)), min 1.
    pub features_per_split: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 50,
            features_per_split: None,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    pub config: RfConfig,
}

struct TreeBuilder<'a> {
    x: &'a FeatureTable,
    y: &'a LabelVector,
    features_per_split: usize,
    min_samples_leaf: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn build(&self, rows: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> TreeNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y.get(r) == 1).count();
        let fraction = pos as f64 / n as f64;
        if pos == 0 || pos == n || n < 2 * self.min_samples_leaf {
            return TreeNode::Leaf {
                positive_fraction: fraction,
            };
        }

        // sample features without replacement; evaluate in ascending index
        // order so ties resolve to the lowest feature index
        let d = self.x.n_features();
        let mut candidates: Vec<usize> = (0..d).collect();
        candidates.shuffle(rng);
        candidates.truncate(self.features_per_split);
        candidates.sort_unstable();

        let parent_impurity = gini(pos as f64, n as f64);
        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for &feature in &candidates {
            sorted.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)));
            let mut left_pos = 0.0;
            let mut left_n = 0.0;
            let total_pos = pos as f64;
            let total_n = n as f64;
            for w in 0..n - 1 {
                let row = sorted[w];
                left_n += 1.0;
                left_pos += f64::from(self.y.get(row));
                let a = self.x.get(sorted[w], feature);
                let b = self.x.get(sorted[w + 1], feature);
                if a == b {
                    continue;
                }
                let threshold = a + (b - a) / 2.0;
                let right_n = total_n - left_n;
                let right_pos = total_pos - left_pos;
                let weighted = (left_n / total_n) * gini(left_pos, left_n)
                    + (right_n / total_n) * gini(right_pos, right_n);
                let gain = parent_impurity - weighted;
                let better = match &best {
                    None => gain > 0.0,
                    // strictly-better wins; ties resolved by the ascending
                    // (feature, threshold) evaluation order
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }

        match best {
            None => TreeNode::Leaf {
                positive_fraction: fraction,
            },
            Some(split) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| self.x.get(r, split.feature) < split.threshold);
                let left = self.build(&left_rows, rng);
                let right = self.build(&right_rows, rng);
                TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
        }
    }
}

/// Trains `n_trees` bagged Gini trees. Tree t draws its bootstrap and node
/// feature samples from sub-seed (seed, t), so parallel and sequential
/// training produce the same forest.
pub fn train_rf(x: &FeatureTable, y: &LabelVector, cfg: &RfConfig) -> Result<RfModel> {
    if cfg.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    if cfg.min_samples_leaf == 0 {
        return Err(Error::Config("min_samples_leaf must be >= 1".into()));
    }
    let n = x.n_rows();
    if n == 0 || x.n_features() == 0 {
        return Err(Error::Empty("cannot train a forest on an empty table"));
    }
    if n != y.len() {
        return Err(Error::Dimension {
            expected: n,
            found: y.len(),
        });
    }
    if !y.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let d = x.n_features();
    let features_per_split = cfg
        .features_per_split
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
        .min(d);

    let builder = TreeBuilder {
        x,
        y,
        features_per_split,
        min_samples_leaf: cfg.min_samples_leaf,
    };

    let trees: Vec<TreeNode> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::rng(seeding::subseed(cfg.seed, "rf-tree", t as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            builder.build(&sample, &mut rng)
        })
        .collect();

    Ok(RfModel {
        trees,
        n_features: d,
        config: cfg.clone(),
    })
}

fn route(node: &TreeNode, row: &[f64]) -> f64 {
    match node {
        TreeNode::Leaf { positive_fraction } => *positive_fraction,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] < *threshold {
                route(left, row)
            } else {
                route(right, row)
            }
        }
    }
}

/// Mean of per-tree leaf positive-fractions.
pub fn predict_rf(model: &RfModel, x: &FeatureTable) -> Result<ScoreVector> {
    if x.n_features() != model.n_features {
        return Err(Error::Dimension {
            expected: model.n_features,
            found: x.n_features(),
        });
    }
    let k = model.trees.len() as f64;
    let scores = (0..x.n_rows())
        .map(|r| {
            let row = x.row(r);
            model.trees.iter().map(|t| route(t, row)).sum::<f64>() / k
        })
        .collect();
    Ok(ScoreVector::new(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;

    fn table(col: &[f64]) -> FeatureTable {
        FeatureTable::new(col.to_vec(), col.len(), vec!["x".into()])
    }

    fn four_points() -> (FeatureTable, LabelVector) {
        (
            table(&[0.1, 0.2, 0.8, 0.9]),
            LabelVector::new(vec![0, 0, 1, 1]),
        )
    }

    /// Exhaustive split enumeration on the 4-point dataset: for any
    /// bootstrap containing both classes the best Gini split falls strictly
    /// between 0.2 and 0.8.
    #[test]
    fn four_point_splits_separate_classes() {
        let (x, y) = four_points();
        let cfg = RfConfig { n_trees: 50, seed: 3, ..RfConfig::default() };
        let model = train_rf(&x, &y, &cfg).unwrap();
        for tree in &model.trees {
            if let TreeNode::Split { threshold, .. } = tree {
                assert!(*threshold > 0.2 && *threshold < 0.8, "threshold {threshold}");
            }
        }
        let scores = predict_rf(&model, &x).unwrap();
        let correct = scores
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .filter(|(&s, &l)| u8::from(s >= 0.5) == l)
            .count();
        assert_eq!(correct, 4);
    }

    #[test]
    fn four_point_negative_side_routes_to_negative_leaf() {
        let (x, y) = four_points();
        // pick the first seed whose bootstraps all contain both classes;
        // with both classes present the only competitive split thresholds
        // lie in (0.2, 0.8) and x = 0.15 routes to the all-negative leaf
        let model = (0..100)
            .map(|seed| {
                let cfg = RfConfig { n_trees: 10, seed, ..RfConfig::default() };
                train_rf(&x, &y, &cfg).unwrap()
            })
            .find(|m| m.trees.iter().all(|t| matches!(t, TreeNode::Split { .. })))
            .expect("some seed in 0..100 bootstraps both classes into every tree");
        let probe = table(&[0.15]);
        let scores = predict_rf(&model, &probe).unwrap();
        assert_eq!(scores.as_slice()[0], 0.0);
    }

    #[test]
    fn constant_features_yield_single_leaves() {
        let x = table(&[0.5; 8]);
        let y = LabelVector::new(vec![0, 1, 0, 1, 0, 1, 0, 1]);
        let cfg = RfConfig { n_trees: 20, seed: 9, ..RfConfig::default() };
        let model = train_rf(&x, &y, &cfg).unwrap();
        for tree in &model.trees {
            match tree {
                TreeNode::Leaf { positive_fraction } => {
                    assert!((0.0..=1.0).contains(positive_fraction));
                }
                other => panic!("expected leaf, got {other:?}"),
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = four_points();
        let cfg = RfConfig { n_trees: 25, seed: 77, ..RfConfig::default() };
        let a = train_rf(&x, &y, &cfg).unwrap();
        let b = train_rf(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_and_empty_table_error() {
        let x = table(&[0.1, 0.9]);
        let y = LabelVector::new(vec![1, 1]);
        assert!(matches!(
            train_rf(&x, &y, &RfConfig::default()),
            Err(Error::SingleClass)
        ));
        let empty = FeatureTable::new(vec![], 0, vec!["x".into()]);
        let y0 = LabelVector::new(vec![]);
        assert!(train_rf(&empty, &y0, &RfConfig::default()).is_err());
    }

    #[test]
    fn single_leaf_forest_predicts_the_constant() {
        let model = RfModel {
            trees: vec![TreeNode::Leaf { positive_fraction: 0.3 }; 7],
            n_features: 1,
            config: RfConfig::default(),
        };
        let scores = predict_rf(&model, &table(&[0.2, 0.9])).unwrap();
        assert!(scores.as_slice().iter().all(|&s| s == 0.3));
    }

    #[test]
    fn predict_dimension_mismatch() {
        let (x, y) = four_points();
        let cfg = RfConfig { n_trees: 3, seed: 2, ..RfConfig::default() };
        let model = train_rf(&x, &y, &cfg).unwrap();
        let wide = FeatureTable::new(vec![0.0; 4], 2, vec!["a".into(), "b".into()]);
        assert!(matches!(predict_rf(&model, &wide), Err(Error::Dimension { .. })));
    }

    #[test]
    fn thresholds_lie_strictly_between_observed_values() {
        let mut rng = seeding::rng(4);
        let n = 60;
        let values: Vec<f64> = (0..n * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let x = FeatureTable::new(values, n, vec!["a".into(), "b".into(), "c".into()]);
        let y = LabelVector::new(labels);
        let cfg = RfConfig { n_trees: 10, seed: 4, ..RfConfig::default() };
        let model = train_rf(&x, &y, &cfg).unwrap();

        fn walk(node: &TreeNode, x: &FeatureTable, check: &mut dyn FnMut(usize, f64)) {
            if let TreeNode::Split { feature, threshold, left, right } = node {
                check(*feature, *threshold);
                walk(left, x, check);
                walk(right, x, check);
            }
        }
        for tree in &model.trees {
            walk(tree, &x, &mut |feature, threshold| {
                let below = x.column(feature).filter(|&v| v < threshold).count();
                let above = x.column(feature).filter(|&v| v > threshold).count();
                assert!(below > 0 && above > 0);
                assert!(x.column(feature).all(|v| v != threshold));
            });
        }
    }

    #[test]
    fn forest_beats_majority_baseline_on_training_data() {
        for seed in 0..20u64 {
            let mut rng = seeding::rng(seed);
            let n = 40;
            let values: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
            labels[0] = 0;
            labels[1] = 1;
            let x = FeatureTable::new(values, n, vec!["a".into(), "b".into()]);
            let y = LabelVector::new(labels);
            let cfg = RfConfig { n_trees: 15, seed, ..RfConfig::default() };
            let model = train_rf(&x, &y, &cfg).unwrap();
            let scores = predict_rf(&model, &x).unwrap();
            let correct = scores
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .filter(|(&s, &l)| u8::from(s >= 0.5) == l)
                .count();
            let majority = y.len() - y.positive_count().min(y.len() - y.positive_count());
            assert!(correct >= majority, "seed {seed}: {correct} < {majority}");
        }
    }

    #[test]
    fn perfect_feature_gives_training_auc_one() {
        let mut rng = seeding::rng(11);
        let n = 30;
        let mut values = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let l = u8::from(i % 2 == 0);
            labels.push(l);
            values.push(if l == 1 {
                rng.random_range(0.7..1.0)
            } else {
                rng.random_range(0.0..0.3)
            });
            values.push(rng.random_range(0.0..1.0));
        }
        let x = FeatureTable::new(values, n, vec!["sep".into(), "noise".into()]);
        let y = LabelVector::new(labels);
        let cfg = RfConfig { n_trees: 30, seed: 11, ..RfConfig::default() };
        let model = train_rf(&x, &y, &cfg).unwrap();
        let scores = predict_rf(&model, &x).unwrap();
        assert_eq!(roc_auc(&y, scores.as_slice()).unwrap(), 1.0);
    }
}
