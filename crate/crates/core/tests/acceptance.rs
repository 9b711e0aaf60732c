//! End-to-end acceptance checks. Each criterion prints one PASS line (run
//! with `cargo test --test acceptance -- --nocapture` to see them) and has a
//! wall-clock budget.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;
use flowrank_core::dataset::{stratified_kfold, stratified_split};
use flowrank_core::harness::{
    self, generate_synthetic, ExperimentPlan, SyntheticSpec,
};
use flowrank_core::metrics::{classification_metrics, roc_auc, ConfusionCounts};
use flowrank_core::model::dff::{gradient_check, train_dff};
use flowrank_core::selection::{
    chi_square_scores, correlation_scores, information_gain_scores,
};
use flowrank_core::seeding;
use flowrank_core::{
    Algorithm, ClassifierKind, DffConfig, FeatureTable, LabelVector, RfConfig,
};

fn finish(criterion: u32, what: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its {budget:?} budget: {elapsed:?}"
    );
    println!("criterion {criterion} ({what}): PASS in {elapsed:.2?}");
}

fn random_instance(seed: u64) -> (FeatureTable, LabelVector) {
    let mut rng = seeding::rng(seed);
    let n = rng.random_range(20usize..=200);
    let d = rng.random_range(2usize..=10);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(u8::from(rng.random_bool(0.4)));
        for _ in 0..d {
            values.push(rng.random_range(0.0..1.0));
        }
    }
    labels[0] = 0;
    labels[1] = 1;
    let names = (0..d).map(|j| format!("f{j}")).collect();
    (FeatureTable::new(values, n, names), LabelVector::new(labels))
}

/// Feature-mass chi-square, written the slow explicit way.
fn chi_square_oracle(x: &FeatureTable, y: &LabelVector, j: usize) -> f64 {
    let classes = [0u8, 1u8];
    let total: f64 = x.column(j).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut stat = 0.0;
    for &c in &classes {
        let class_n = y.as_slice().iter().filter(|&&l| l == c).count() as f64;
        let observed: f64 = (0..x.n_rows())
            .filter(|&r| y.get(r) == c)
            .map(|r| x.get(r, j))
            .sum();
        let expected = total * class_n / y.len() as f64;
        if expected > 0.0 {
            stat += (observed - expected).powi(2) / expected;
        }
    }
    stat
}

/// Population-moment |Pearson correlation|, written the slow explicit way.
fn correlation_oracle(x: &FeatureTable, y: &LabelVector, j: usize) -> f64 {
    let n = x.n_rows() as f64;
    let xs: Vec<f64> = x.column(j).collect();
    let ys: Vec<f64> = y.as_slice().iter().map(|&l| f64::from(l)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let vx = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = ys.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    (cov / (vx.sqrt() * vy.sqrt())).abs()
}

/// Exhaustive pairwise AUC over all (positive, negative) pairs.
fn auc_oracle(y: &LabelVector, s: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        if y.get(i) != 1 {
            continue;
        }
        for j in 0..y.len() {
            if y.get(j) != 0 {
                continue;
            }
            pairs += 1.0;
            if s[i] > s[j] {
                wins += 1.0;
            } else if s[i] == s[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_1_scores_match_brute_force_oracles() {
    let started = Instant::now();
    for seed in 0..100u64 {
        let (x, y) = random_instance(seed);
        let chi = chi_square_scores(&x, &y).unwrap();
        let cor = correlation_scores(&x, &y).unwrap();
        for j in 0..x.n_features() {
            let chi_ref = chi_square_oracle(&x, &y, j);
            assert!(
                (chi[j].score - chi_ref).abs() < 1e-9,
                "seed {seed} feature {j}: chi {} vs oracle {chi_ref}",
                chi[j].score
            );
            let cor_ref = correlation_oracle(&x, &y, j);
            assert!(
                (cor[j].score - cor_ref).abs() < 1e-9,
                "seed {seed} feature {j}: corr {} vs oracle {cor_ref}",
                cor[j].score
            );
        }
        let scores: Vec<f64> = x.column(0).collect();
        let fast = roc_auc(&y, &scores).unwrap();
        let slow = auc_oracle(&y, &scores);
        assert!((fast - slow).abs() < 1e-9, "seed {seed}: auc {fast} vs oracle {slow}");
    }
    finish(1, "score oracles", started, Duration::from_secs(10));
}

/// Joint-histogram mutual information, symmetric in its two arguments.
fn mi_from_joint(joint: &[Vec<f64>]) -> f64 {
    let total: f64 = joint.iter().flatten().sum();
    let row_m: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let n_cols = joint[0].len();
    let col_m: Vec<f64> = (0..n_cols)
        .map(|c| joint.iter().map(|r| r[c]).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for (r, row) in joint.iter().enumerate() {
        for (c, &cell) in row.iter().enumerate() {
            let p = cell / total;
            if p > 0.0 {
                mi += p * (p / (row_m[r] * col_m[c])).ln();
            }
        }
    }
    mi
}

#[test]
fn criterion_2_information_gain_sanity() {
    let started = Instant::now();
    let bins = 10;

    // constant feature carries exactly zero information
    let n = 64;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rng = seeding::rng(42);
    for i in 0..n {
        values.push(0.7); // constant column
        values.push(rng.random_range(0.0..1.0));
        labels.push(u8::from(i % 2 == 0));
    }
    let x = FeatureTable::new(values, n, vec!["const".into(), "noise".into()]);
    let y = LabelVector::new(labels);
    let ig = information_gain_scores(&x, &y, bins).unwrap();
    assert_eq!(ig[0].score, 0.0, "constant feature must have exactly zero gain");

    // plug-in estimate equals the symmetric joint-histogram form to 1e-12
    for seed in 0..20u64 {
        let (x, y) = random_instance(seed);
        let ig = information_gain_scores(&x, &y, bins).unwrap();
        for j in 0..x.n_features() {
            let xs: Vec<f64> = x.column(j).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut joint = vec![vec![0.0; 2]; bins];
            for (v, &l) in xs.iter().zip(y.as_slice()) {
                let b = if hi == lo {
                    0
                } else {
                    (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
                };
                joint[b][usize::from(l)] += 1.0;
            }
            let sym = mi_from_joint(&joint);
            assert!(
                (ig[j].score - sym).abs() < 1e-12,
                "seed {seed} feature {j}: {} vs symmetric {sym}",
                ig[j].score
            );
        }
    }

    // a feature identical to a balanced binary label yields ln 2 nats
    let n = 100;
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
    let values: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let x = FeatureTable::new(values, n, vec!["copy".into()]);
    let y = LabelVector::new(labels);
    let ig = information_gain_scores(&x, &y, bins).unwrap();
    assert!(
        (ig[0].score - std::f64::consts::LN_2).abs() < 1e-9,
        "got {}",
        ig[0].score
    );

    finish(2, "information gain sanity", started, Duration::from_secs(5));
}

#[test]
fn criterion_3_dff_gradients_match_finite_differences() {
    let started = Instant::now();
    for seed in 0..50u64 {
        let mut rng = seeding::rng(seed);
        let n = 24;
        let d = rng.random_range(2usize..=6);
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            labels.push(u8::from(i % 2 == 0));
            for _ in 0..d {
                values.push(rng.random_range(0.0..1.0));
            }
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let x = FeatureTable::new(values, n, names);
        let y = LabelVector::new(labels);
        let cfg = DffConfig {
            hidden_layers: 2,
            hidden_width: 5,
            epochs: 1,
            batch_size: 8,
            seed,
            ..DffConfig::default()
        };
        let model = train_dff(&x, &y, &cfg).unwrap();
        let max_rel = gradient_check(&model, &x, &y, 1e-5).unwrap();
        assert!(max_rel < 1e-4, "seed {seed}: max relative error {max_rel}");
    }
    finish(3, "gradient check", started, Duration::from_secs(30));
}

#[test]
fn criterion_4_hidden_label_detection_end_to_end() {
    let started = Instant::now();
    let (x, y) = generate_synthetic(&SyntheticSpec {
        n: 2000,
        d: 10,
        leak_strength: 1.0,
        class_balance: 0.5,
        seed: 99,
    })
    .unwrap();
    let leak = x.feature_index("leak").unwrap();
    let plan = ExperimentPlan {
        seed: 99,
        max_subset_size: Some(1),
        measure_timing: false,
        ..ExperimentPlan::default()
    };

    // every ranking algorithm puts the leak first
    for ranking in harness::run_rankings(&x, &y, &plan).unwrap() {
        assert_eq!(
            ranking.order[0], leak,
            "{:?} did not rank the leak first",
            ranking.algorithm
        );
    }

    // a single leaked feature is enough for near-perfect AUC
    let sweep = harness::sweep_subsets(&x, &y, &plan, "synthetic").unwrap();
    for &cls in &[ClassifierKind::Dff, ClassifierKind::Rf] {
        for &algo in &Algorithm::ALL {
            let cell = sweep.cell(algo, cls, 1).unwrap();
            assert!(cell.error.is_none(), "{algo:?}/{cls:?}: {:?}", cell.error);
            assert!(
                cell.mean.auc >= 0.99,
                "{algo:?}/{cls:?} k=1 auc {}",
                cell.mean.auc
            );
        }
    }

    // the audit flags the leak and nothing else
    let audit =
        harness::audit_hidden_labels(&x, &y, &plan, ClassifierKind::Rf, 0.02, "synthetic")
            .unwrap();
    assert_eq!(audit.flagged_features(), ["leak"]);

    // dropping it removes both the flag and the shortcut
    let (_, rerun) =
        harness::remove_and_rerun(&x, &y, &plan, &["leak".into()], "synthetic").unwrap();
    for &cls in &[ClassifierKind::Dff, ClassifierKind::Rf] {
        for &algo in &Algorithm::ALL {
            let cell = rerun.cell(algo, cls, 1).unwrap();
            assert!(
                cell.mean.auc <= 0.7,
                "{algo:?}/{cls:?} post-removal k=1 auc {}",
                cell.mean.auc
            );
        }
    }
    let (reduced, _) = harness::remove_features(&x, &["leak".into()]).unwrap();
    let audit2 =
        harness::audit_hidden_labels(&reduced, &y, &plan, ClassifierKind::Rf, 0.02, "synthetic")
            .unwrap();
    assert!(
        audit2.flagged_features().is_empty(),
        "post-removal flags: {:?}",
        audit2.flagged_features()
    );

    finish(4, "hidden-label detection", started, Duration::from_secs(120));
}

#[test]
fn criterion_5_protocol_invariants() {
    let started = Instant::now();

    // stratification: per-class fold counts never deviate by more than one
    for seed in 0..100u64 {
        let mut rng = seeding::rng(seed);
        let n = rng.random_range(30usize..300);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        for i in 0..10 {
            labels[i] = u8::from(i % 2 == 0);
        }
        let y = LabelVector::new(labels);

        let folds = stratified_kfold(&y, 5, seed).unwrap();
        for class in [0u8, 1u8] {
            let counts: Vec<usize> = (0..5)
                .map(|f| {
                    folds
                        .test_indices(f)
                        .iter()
                        .filter(|&&r| y.get(r) == class)
                        .count()
                })
                .collect();
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            assert!(spread <= 1, "seed {seed} class {class}: fold counts {counts:?}");
        }

        let split = stratified_split(&y, 0.7, seed).unwrap();
        for class in [0u8, 1u8] {
            let total = y.as_slice().iter().filter(|&&l| l == class).count();
            let in_train = split
                .train_indices
                .iter()
                .filter(|&&r| y.get(r) == class)
                .count();
            let ideal = 0.7 * total as f64;
            assert!(
                (in_train as f64 - ideal).abs() <= 0.5 + 1e-9,
                "seed {seed} class {class}: {in_train} of {total} in train"
            );
        }
    }

    // nested prefixes and the k = d / baseline equality on one shared sweep
    let (x, y) = generate_synthetic(&SyntheticSpec {
        n: 400,
        d: 6,
        leak_strength: 0.5,
        class_balance: 0.5,
        seed: 7,
    })
    .unwrap();
    let plan = ExperimentPlan {
        seed: 7,
        measure_timing: false,
        dff: DffConfig { epochs: 4, ..DffConfig::default() },
        rf: RfConfig { n_trees: 15, ..RfConfig::default() },
        ..ExperimentPlan::default()
    };
    for ranking in harness::run_rankings(&x, &y, &plan).unwrap() {
        for k in 1..x.n_features() {
            let small: BTreeSet<usize> = ranking.top_k(k).into_iter().collect();
            let big: BTreeSet<usize> = ranking.top_k(k + 1).into_iter().collect();
            assert!(small.is_subset(&big), "{:?} k={k}", ranking.algorithm);
        }
    }
    let sweep = harness::sweep_subsets(&x, &y, &plan, "synthetic").unwrap();
    for &cls in &[ClassifierKind::Dff, ClassifierKind::Rf] {
        let baseline = sweep.baseline(cls).unwrap();
        for &algo in &Algorithm::ALL {
            let cell = sweep.cell(algo, cls, x.n_features()).unwrap();
            for (a, b) in cell.per_fold.iter().zip(&baseline.per_fold) {
                assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
                assert_eq!(a.recall.to_bits(), b.recall.to_bits());
                assert_eq!(a.precision.to_bits(), b.precision.to_bits());
                assert_eq!(a.f1.to_bits(), b.f1.to_bits());
                assert_eq!(a.far.to_bits(), b.far.to_bits());
                assert_eq!(a.auc.to_bits(), b.auc.to_bits());
            }
        }
    }

    // two identical runs emit byte-identical report trees
    let emit = |dir: &std::path::Path| {
        let rankings = harness::run_rankings(&x, &y, &plan).unwrap();
        harness::write_rankings(dir, &rankings).unwrap();
        let sweep = harness::sweep_subsets(&x, &y, &plan, "synthetic").unwrap();
        harness::write_sweep(dir, &sweep).unwrap();
        let audit =
            harness::audit_hidden_labels(&x, &y, &plan, ClassifierKind::Rf, 0.02, "synthetic")
                .unwrap();
        harness::write_audit(dir, &audit).unwrap();
        harness::write_manifest(dir, &plan).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit(a.path());
    emit(b.path());
    let mut checked = 0;
    for entry in walk(a.path()) {
        let rel = entry.strip_prefix(a.path()).unwrap();
        let left = std::fs::read(&entry).unwrap();
        let right = std::fs::read(b.path().join(rel)).unwrap();
        assert_eq!(left, right, "{} differs between identical runs", rel.display());
        checked += 1;
    }
    assert!(checked >= 10, "expected a full report tree, saw {checked} files");

    finish(5, "protocol invariants", started, Duration::from_secs(120));
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_6_metric_formulas_on_hand_counts() {
    let started = Instant::now();
    let m = classification_metrics(&ConfusionCounts { tp: 9, fn_: 1, fp: 2, tn: 88 }).unwrap();
    assert!((m.recall - 0.9000).abs() < 5e-5, "recall {}", m.recall);
    assert!((m.precision - 0.8182).abs() < 5e-5, "precision {}", m.precision);
    assert!((m.f1 - 0.8571).abs() < 5e-5, "f1 {}", m.f1);
    assert!((m.accuracy - 0.9700).abs() < 5e-5, "accuracy {}", m.accuracy);
    assert!((m.far - 0.0222).abs() < 5e-5, "far {}", m.far);
    finish(6, "metric formulas", started, Duration::from_secs(5));
}
