//! Shared data generation for the benchmark suite.

use rand::Rng;
use flowrank_core::seeding;
use flowrank_core::{FeatureTable, LabelVector};

/// Random dense table with one mildly informative feature so classifier
/// benches exercise realistic (non-degenerate) trees and gradients.
pub fn bench_data(n: usize, d: usize, seed: u64) -> (FeatureTable, LabelVector) {
    let mut rng = seeding::rng(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = u8::from(rng.random_bool(0.5));
        labels.push(label);
        for j in 0..d {
            let bias = if j == 0 { 0.3 * f64::from(label) } else { 0.0 };
            values.push((bias + rng.random_range(0.0..0.7)).min(1.0));
        }
    }
    labels[0] = 0;
    labels[1] = 1;
    let names = (0..d).map(|j| format!("f{j:02}")).collect();
    (FeatureTable::new(values, n, names), LabelVector::new(labels))
}
