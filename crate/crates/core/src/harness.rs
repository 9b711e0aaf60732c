//! Experiment orchestration: full-feature baselines, incremental top-k
//! subset sweeps, the hidden-label audit, synthetic data for self-tests,
//! and report emission.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, minmax_apply, minmax_fit, stratified_kfold, stratified_split, DatasetProfile,
    FeatureTable, LabelVector, SpecSource,
};
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics, confusion, roc_auc, timed_predict, MetricsReport};
use crate::model::{ClassifierKind, DffConfig, RfConfig, TrainedModel};
use crate::seeding;
use crate::selection::{score_and_rank, Algorithm, FeatureRanking};

/// Full AUC below this is treated as chance level; the audit reports no
/// flags for a model with no signal.
pub const AUDIT_CHANCE_GUARD: f64 = 0.55;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    Kfold { k: usize },
    Holdout { ratio: f64 },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Kfold { k: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub classifiers: Vec<ClassifierKind>,
    /// None resolves to min(15, d).
    pub max_subset_size: Option<usize>,
    pub evaluation: EvalMode,
    pub seed: u64,
    pub removed_features: Vec<String>,
    /// Hidden-label flag margin.
    pub delta: f64,
    /// Histogram bins for information gain.
    pub bins: usize,
    pub threshold: f64,
    pub dff: DffConfig,
    pub rf: RfConfig,
    /// When false, prediction_time_us is reported as 0 so that two runs of
    /// the same plan produce byte-identical files.
    pub measure_timing: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            dataset: None,
            profile: None,
            algorithms: Algorithm::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            max_subset_size: None,
            evaluation: EvalMode::default(),
            seed: 0,
            removed_features: Vec::new(),
            delta: 0.02,
            bins: 10,
            threshold: 0.5,
            dff: DffConfig::default(),
            rf: RfConfig::default(),
            measure_timing: true,
            out_dir: None,
        }
    }
}

impl ExperimentPlan {
    pub fn resolved_max_subset(&self, d: usize) -> usize {
        self.max_subset_size.unwrap_or_else(|| d.min(15)).min(d)
    }

    /// Parses a plain-text `key = value` plan document.
    pub fn parse(text: &str) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::default();
        let mut mode: Option<String> = None;
        let mut k: Option<usize> = None;
        let mut ratio: Option<f64> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("plan line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Config(format!("plan key {key}: {what}: {value:?}"));
            match key {
                "dataset" => plan.dataset = Some(PathBuf::from(value)),
                "profile" => plan.profile = Some(PathBuf::from(value)),
                "algorithms" => {
                    plan.algorithms = value
                        .split(',')
                        .map(|a| a.trim().parse())
                        .collect::<Result<_>>()?;
                }
                "classifiers" => {
                    plan.classifiers = value
                        .split(',')
                        .map(|c| c.trim().parse())
                        .collect::<Result<_>>()?;
                }
                "max_subset" | "max_k" => {
                    plan.max_subset_size =
                        Some(value.parse().map_err(|_| bad("not an integer"))?);
                }
                "mode" => mode = Some(value.to_string()),
                "k" => k = Some(value.parse().map_err(|_| bad("not an integer"))?),
                "ratio" => ratio = Some(value.parse().map_err(|_| bad("not a number"))?),
                "seed" => plan.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "removed_features" | "remove" => {
                    plan.removed_features = value
                        .split(',')
                        .map(|f| f.trim().to_string())
                        .filter(|f| !f.is_empty())
                        .collect();
                }
                "delta" => plan.delta = value.parse().map_err(|_| bad("not a number"))?,
                "bins" => plan.bins = value.parse().map_err(|_| bad("not an integer"))?,
                "threshold" => {
                    plan.threshold = value.parse().map_err(|_| bad("not a number"))?
                }
                "epochs" => {
                    plan.dff.epochs = value.parse().map_err(|_| bad("not an integer"))?
                }
                "trees" => {
                    plan.rf.n_trees = value.parse().map_err(|_| bad("not an integer"))?
                }
                "timing" => {
                    plan.measure_timing = match value {
                        "on" | "true" | "1" => true,
                        "off" | "false" | "0" => false,
                        _ => return Err(bad("expected on/off")),
                    }
                }
                "output" | "out" => plan.out_dir = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!(
                        "plan line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        match (mode.as_deref(), k, ratio) {
            (Some("holdout"), _, r) => {
                plan.evaluation = EvalMode::Holdout { ratio: r.unwrap_or(0.7) };
            }
            (Some("kfold") | None, kk, _) => {
                plan.evaluation = EvalMode::Kfold { k: kk.unwrap_or(5) };
            }
            (Some(other), _, _) => {
                return Err(Error::Config(format!("unknown mode {other:?}")));
            }
        }
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<ExperimentPlan> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentPlan::parse(&text)
    }
}

/// One train/test partition; kfold mode yields k of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPartition {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

pub fn resolve_partitions(labels: &LabelVector, plan: &ExperimentPlan) -> Result<Vec<FoldPartition>> {
    match plan.evaluation {
        EvalMode::Kfold { k } => {
            let folds = stratified_kfold(labels, k, plan.seed)?;
            Ok((0..k)
                .map(|f| FoldPartition {
                    fold: f,
                    train_rows: folds.train_indices(f),
                    test_rows: folds.test_indices(f),
                })
                .collect())
        }
        EvalMode::Holdout { ratio } => {
            let split = stratified_split(labels, ratio, plan.seed)?;
            Ok(vec![FoldPartition {
                fold: 0,
                train_rows: split.train_indices,
                test_rows: split.test_indices,
            }])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub classifier: ClassifierKind,
    pub subset_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub key: CellKey,
    pub per_fold: Vec<MetricsReport>,
    pub mean: MetricsReport,
    /// A failed cell records its error and does not abort the sweep.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineCell {
    pub classifier: ClassifierKind,
    pub per_fold: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub baselines: Vec<BaselineCell>,
    pub partitions: Vec<FoldPartition>,
    /// Per (fold): rows used to fit normalization stats and rankings.
    /// Always equal to the fold's training rows; kept so leakage can be
    /// asserted rather than assumed.
    pub fit_rows: Vec<Vec<usize>>,
    pub feature_names: Vec<String>,
    pub removed_features: Vec<String>,
    pub dataset_name: String,
    pub seed: u64,
}

impl SweepResult {
    pub fn cell(&self, algorithm: Algorithm, classifier: ClassifierKind, k: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| {
            c.key.algorithm == algorithm
                && c.key.classifier == classifier
                && c.key.subset_size == k
        })
    }

    pub fn baseline(&self, classifier: ClassifierKind) -> Option<&BaselineCell> {
        self.baselines.iter().find(|b| b.classifier == classifier)
    }
}

fn mean_reports(reports: &[MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let mut mean = MetricsReport {
        classifier: reports[0].classifier.clone(),
        selection: reports[0].selection.clone(),
        n_features: reports[0].n_features,
        degenerate: reports.iter().any(|r| r.degenerate),
        ..MetricsReport::default()
    };
    for r in reports {
        mean.accuracy += r.accuracy / n;
        mean.recall += r.recall / n;
        mean.precision += r.precision / n;
        mean.f1 += r.f1 / n;
        mean.far += r.far / n;
        mean.auc += r.auc / n;
        mean.prediction_time_us += r.prediction_time_us / n;
    }
    mean
}

fn train_seed(plan_seed: u64, classifier: ClassifierKind, fold: usize) -> u64 {
    // deliberately independent of algorithm and subset size: the k = d cell
    // must reproduce the full-feature baseline bit-for-bit
    let domain = match classifier {
        ClassifierKind::Dff => "train-dff",
        ClassifierKind::Rf => "train-rf",
    };
    seeding::subseed(plan_seed, domain, fold as u64)
}

struct FoldData {
    train_x: FeatureTable,
    train_y: LabelVector,
    test_x: FeatureTable,
    test_y: LabelVector,
}

fn prepare_fold(table: &FeatureTable, y: &LabelVector, part: &FoldPartition) -> Result<FoldData> {
    let train_raw = table.select_rows(&part.train_rows);
    let stats = minmax_fit(&train_raw)?;
    Ok(FoldData {
        train_x: minmax_apply(&train_raw, &stats)?,
        train_y: y.select(&part.train_rows),
        test_x: minmax_apply(&table.select_rows(&part.test_rows), &stats)?,
        test_y: y.select(&part.test_rows),
    })
}

fn evaluate(
    plan: &ExperimentPlan,
    fold: &FoldData,
    cols: &[usize],
    classifier: ClassifierKind,
    seed: u64,
    selection: String,
) -> Result<MetricsReport> {
    let train_x = fold.train_x.select_columns(cols);
    let test_x = fold.test_x.select_columns(cols);
    let model = TrainedModel::train(classifier, &train_x, &fold.train_y, &plan.dff, &plan.rf, seed)?;
    let (scores, time_us) = timed_predict(&model, &test_x)?;
    let counts = confusion(&fold.test_y, &scores, plan.threshold)?;
    let mut report = classification_metrics(&counts)?;
    report.auc = roc_auc(&fold.test_y, scores.as_slice())?;
    report.prediction_time_us = if plan.measure_timing { time_us } else { 0.0 };
    report.n_features = cols.len();
    report.classifier = classifier.tag().into();
    report.selection = selection;
    Ok(report)
}

/// Ranks features with every requested algorithm on the first partition's
/// training rows (normalized with stats fitted on those rows only).
pub fn run_rankings(
    table: &FeatureTable,
    y: &LabelVector,
    plan: &ExperimentPlan,
) -> Result<Vec<FeatureRanking>> {
    let partitions = resolve_partitions(y, plan)?;
    let part = &partitions[0];
    let fold = prepare_fold(table, y, part)?;
    plan.algorithms
        .iter()
        .map(|&algo| score_and_rank(&fold.train_x, &fold.train_y, algo, plan.bins))
        .collect()
}

/// Evaluates every (algorithm, classifier, k) cell plus the full-feature
/// baselines. Rankings and normalization are refit inside each fold.
pub fn sweep_subsets(
    table: &FeatureTable,
    y: &LabelVector,
    plan: &ExperimentPlan,
    dataset_name: &str,
) -> Result<SweepResult> {
    let d = table.n_features();
    if d == 0 {
        return Err(Error::Empty("no features to sweep"));
    }
    let max_k = plan.resolved_max_subset(d);
    let partitions = resolve_partitions(y, plan)?;

    let mut fit_rows = Vec::with_capacity(partitions.len());
    let mut fold_reports: Vec<Vec<std::result::Result<MetricsReport, String>>> = Vec::new();
    let mut baseline_reports: Vec<Vec<MetricsReport>> =
        vec![Vec::new(); plan.classifiers.len()];

    // cell order: algorithm-major, then classifier, then k
    let mut keys = Vec::new();
    for &algo in &plan.algorithms {
        for &cls in &plan.classifiers {
            for k in 1..=max_k {
                keys.push(CellKey {
                    algorithm: algo,
                    classifier: cls,
                    subset_size: k,
                });
            }
        }
    }

    for part in &partitions {
        let fold = prepare_fold(table, y, part)?;
        fit_rows.push(part.train_rows.clone());

        let all_cols: Vec<usize> = (0..d).collect();
        for (ci, &cls) in plan.classifiers.iter().enumerate() {
            let seed = train_seed(plan.seed, cls, part.fold);
            let report = evaluate(plan, &fold, &all_cols, cls, seed, "full".into())?;
            baseline_reports[ci].push(report);
        }

        let mut rankings = Vec::with_capacity(plan.algorithms.len());
        for &algo in &plan.algorithms {
            rankings.push(score_and_rank(&fold.train_x, &fold.train_y, algo, plan.bins)?);
        }

        let mut reports = Vec::with_capacity(keys.len());
        for key in &keys {
            let ranking = &rankings[plan
                .algorithms
                .iter()
                .position(|&a| a == key.algorithm)
                .unwrap()];
            // materialize the top-k set in ascending column order so the
            // k = d cell presents columns identically to the baseline
            let mut cols = ranking.top_k(key.subset_size);
            cols.sort_unstable();
            let seed = train_seed(plan.seed, key.classifier, part.fold);
            let selection = format!("{}({})", key.algorithm.tag(), key.subset_size);
            let outcome = evaluate(plan, &fold, &cols, key.classifier, seed, selection)
                .map_err(|e| e.to_string());
            reports.push(outcome);
        }
        fold_reports.push(reports);
    }

    let cells = keys
        .into_iter()
        .enumerate()
        .map(|(i, key)| {
            let mut per_fold = Vec::new();
            let mut error = None;
            for fold in &fold_reports {
                match &fold[i] {
                    Ok(r) => per_fold.push(r.clone()),
                    Err(e) => error = Some(e.clone()),
                }
            }
            let mean = if per_fold.is_empty() {
                MetricsReport::default()
            } else {
                mean_reports(&per_fold)
            };
            SweepCell {
                key,
                per_fold,
                mean,
                error,
            }
        })
        .collect();

    let baselines = plan
        .classifiers
        .iter()
        .zip(baseline_reports)
        .map(|(&classifier, per_fold)| BaselineCell {
            classifier,
            mean: mean_reports(&per_fold),
            per_fold,
        })
        .collect();

    Ok(SweepResult {
        cells,
        baselines,
        partitions,
        fit_rows,
        feature_names: table.feature_names.clone(),
        removed_features: plan.removed_features.clone(),
        dataset_name: dataset_name.into(),
        seed: plan.seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditEntry {
    pub feature_index: usize,
    pub feature_name: String,
    pub auc_single: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    /// Sorted by auc_single descending.
    pub entries: Vec<AuditEntry>,
    pub auc_full: f64,
    pub delta: f64,
    pub classifier: ClassifierKind,
    pub dataset_name: String,
}

impl AuditReport {
    pub fn flagged_features(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.flagged)
            .map(|e| e.feature_name.as_str())
            .collect()
    }
}

/// Trains the classifier on each feature alone and on the full set under
/// the same folds and seeds; flags feature j when its mean single-feature
/// AUC comes within `delta` of the full-feature AUC. A full model at chance
/// level (below [`AUDIT_CHANCE_GUARD`]) flags nothing.
pub fn audit_hidden_labels(
    table: &FeatureTable,
    y: &LabelVector,
    plan: &ExperimentPlan,
    classifier: ClassifierKind,
    delta: f64,
    dataset_name: &str,
) -> Result<AuditReport> {
    let d = table.n_features();
    if d == 0 {
        return Err(Error::Empty("no features to audit"));
    }
    let partitions = resolve_partitions(y, plan)?;
    let all_cols: Vec<usize> = (0..d).collect();

    let mut full_aucs = Vec::new();
    let mut single_aucs = vec![Vec::new(); d];
    for part in &partitions {
        let fold = prepare_fold(table, y, part)?;
        let seed = train_seed(plan.seed, classifier, part.fold);
        let full = evaluate(plan, &fold, &all_cols, classifier, seed, "full".into())?;
        full_aucs.push(full.auc);
        for j in 0..d {
            let single = evaluate(
                plan,
                &fold,
                &[j],
                classifier,
                seed,
                format!("single({})", table.feature_names[j]),
            )?;
            single_aucs[j].push(single.auc);
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let auc_full = mean(&full_aucs);
    let has_signal = auc_full >= AUDIT_CHANCE_GUARD;

    let mut entries: Vec<AuditEntry> = (0..d)
        .map(|j| {
            let auc_single = mean(&single_aucs[j]);
            AuditEntry {
                feature_index: j,
                feature_name: table.feature_names[j].clone(),
                auc_single,
                flagged: has_signal && auc_single >= auc_full - delta,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.auc_single
            .total_cmp(&a.auc_single)
            .then(a.feature_index.cmp(&b.feature_index))
    });

    Ok(AuditReport {
        entries,
        auc_full,
        delta,
        classifier,
        dataset_name: dataset_name.into(),
    })
}

/// Drops the named columns and reruns rankings plus the sweep.
pub fn remove_and_rerun(
    table: &FeatureTable,
    y: &LabelVector,
    plan: &ExperimentPlan,
    features_to_remove: &[String],
    dataset_name: &str,
) -> Result<(Vec<FeatureRanking>, SweepResult)> {
    let (reduced, removed) = remove_features(table, features_to_remove)?;
    let mut plan = plan.clone();
    plan.removed_features = removed;
    let rankings = run_rankings(&reduced, y, &plan)?;
    let sweep = sweep_subsets(&reduced, y, &plan, dataset_name)?;
    Ok((rankings, sweep))
}

/// Removes columns by name; errors on an unknown name.
pub fn remove_features(
    table: &FeatureTable,
    names: &[String],
) -> Result<(FeatureTable, Vec<String>)> {
    let mut drop = BTreeSet::new();
    for name in names {
        let idx = table
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        drop.insert(idx);
    }
    let keep: Vec<usize> = (0..table.n_features()).filter(|j| !drop.contains(j)).collect();
    let mut reduced = table.select_columns(&keep);
    if !names.is_empty() {
        reduced
            .provenance
            .push(format!("removed features: {}", names.join(", ")));
    }
    Ok((reduced, names.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub leak_strength: f64,
    pub class_balance: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 1000,
            d: 10,
            leak_strength: 1.0,
            class_balance: 0.5,
            seed: 0,
        }
    }
}

/// Desk-scale stand-in for a dataset with a hidden-label feature: i.i.d.
/// uniform noise columns plus, when leak_strength > 0, one column equal to
/// the label flipped with probability (1 - leak_strength) / 2. The leak
/// column is always the last one and is named "leak".
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FeatureTable, LabelVector)> {
    if spec.n < 10 || spec.d < 1 {
        return Err(Error::Config(format!(
            "synthetic spec needs n >= 10 and d >= 1, got n = {}, d = {}",
            spec.n, spec.d
        )));
    }
    if !(0.0..=1.0).contains(&spec.leak_strength) {
        return Err(Error::Config(format!(
            "leak_strength {} not in [0,1]",
            spec.leak_strength
        )));
    }
    if !(0.0 < spec.class_balance && spec.class_balance < 1.0) {
        return Err(Error::Config(format!(
            "class_balance {} not in (0,1)",
            spec.class_balance
        )));
    }
    let mut rng = seeding::rng(seeding::subseed(spec.seed, "synthetic", 0));
    let n_pos = ((spec.class_balance * spec.n as f64).round() as usize).clamp(1, spec.n - 1);
    let mut labels: Vec<u8> = vec![1; n_pos];
    labels.resize(spec.n, 0);
    labels.shuffle(&mut rng);

    let has_leak = spec.leak_strength > 0.0;
    let flip_prob = (1.0 - spec.leak_strength) / 2.0;
    let mut values = Vec::with_capacity(spec.n * spec.d);
    for &label in &labels {
        for j in 0..spec.d {
            if has_leak && j == spec.d - 1 {
                let flip = rng.random_bool(flip_prob);
                values.push(f64::from(label ^ u8::from(flip)));
            } else {
                values.push(rng.random_range(0.0..1.0));
            }
        }
    }
    let mut names: Vec<String> = (0..spec.d).map(|j| format!("f{j:02}")).collect();
    if has_leak {
        names[spec.d - 1] = "leak".into();
    }
    let mut table = FeatureTable::new(values, spec.n, names);
    table
        .provenance
        .push(format!("synthetic: {spec:?}"));
    Ok((table, LabelVector::new(labels)))
}

/// Loads and preprocesses a dataset per its profile: drop identifiers,
/// label-encode, sanitize. Returns the table, labels, dataset name, and any
/// warnings.
pub fn load_prepared(
    dataset: &Path,
    profile: &DatasetProfile,
) -> Result<(FeatureTable, LabelVector, String, Vec<String>)> {
    let raw = dataset::load_csv(dataset, SpecSource::Infer(profile.clone()))?;
    let raw = dataset::drop_identifiers(raw);
    let warnings = raw.warnings.clone();
    let (table, labels) = dataset::encode(&raw, &profile.attack_values, false)?;
    let table = dataset::sanitize(&table);
    let name = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok((table, labels, name, warnings))
}

// ---------------------------------------------------------------------------
// report emission

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(content.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// rankings/<algo>.csv in (rank, feature, algorithm, score) layout.
pub fn write_rankings(out_dir: &Path, rankings: &[FeatureRanking]) -> Result<Vec<PathBuf>> {
    if rankings.is_empty() {
        return Err(Error::Empty("no rankings to write"));
    }
    let dir = out_dir.join("rankings");
    create_dir(&dir)?;
    let mut written = Vec::new();
    for ranking in rankings {
        let mut text = String::from("rank,feature,algorithm,score\n");
        for (rank, &idx) in ranking.order.iter().enumerate() {
            let score = ranking
                .scores
                .iter()
                .find(|s| s.feature_index == idx)
                .unwrap();
            text.push_str(&format!(
                "{},{},{},{:.6}\n",
                rank + 1,
                score.feature_name,
                ranking.algorithm.tag(),
                score.score
            ));
        }
        let path = dir.join(format!("{}.csv", ranking.algorithm.tag()));
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

fn metric_row(dataset: &str, r: &MetricsReport) -> String {
    format!(
        "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
        dataset,
        r.classifier,
        r.selection,
        r.accuracy,
        r.auc,
        r.f1,
        r.recall,
        r.far,
        r.prediction_time_us
    )
}

const METRIC_HEADER: &str =
    "dataset,classifier,selection,accuracy,auc,f1,dr,far,prediction_time_us\n";

/// sweep/<classifier>_<algo>.csv plus curves/<classifier>.tsv plus
/// sweep_result.json.
pub fn write_sweep(out_dir: &Path, result: &SweepResult) -> Result<Vec<PathBuf>> {
    if result.cells.is_empty() {
        return Err(Error::Empty("sweep produced no cells"));
    }
    let sweep_dir = out_dir.join("sweep");
    let curves_dir = out_dir.join("curves");
    create_dir(&sweep_dir)?;
    create_dir(&curves_dir)?;
    let mut written = Vec::new();

    let mut classifiers: Vec<ClassifierKind> =
        result.cells.iter().map(|c| c.key.classifier).collect();
    classifiers.dedup();
    let mut algorithms: Vec<Algorithm> = result.cells.iter().map(|c| c.key.algorithm).collect();
    algorithms.sort_by_key(|a| a.tag());
    algorithms.dedup();
    classifiers.sort_by_key(|c| c.tag());
    classifiers.dedup();

    for &cls in &classifiers {
        for &algo in &algorithms {
            let mut text = String::from(METRIC_HEADER);
            if let Some(baseline) = result.baseline(cls) {
                text.push_str(&metric_row(&result.dataset_name, &baseline.mean));
            }
            let mut cells: Vec<&SweepCell> = result
                .cells
                .iter()
                .filter(|c| c.key.classifier == cls && c.key.algorithm == algo)
                .collect();
            cells.sort_by_key(|c| c.key.subset_size);
            for cell in cells {
                match &cell.error {
                    Some(e) => text.push_str(&format!(
                        "{},{},{}({}),error: {}\n",
                        result.dataset_name,
                        cls.tag(),
                        algo.tag(),
                        cell.key.subset_size,
                        e
                    )),
                    None => text.push_str(&metric_row(&result.dataset_name, &cell.mean)),
                }
            }
            let path = sweep_dir.join(format!("{}_{}.csv", cls.tag(), algo.tag()));
            write_file(&path, &text)?;
            written.push(path);
        }

        // plot-ready curve: x = subset size, one AUC series per algorithm,
        // one constant full-feature reference series
        let max_k = result
            .cells
            .iter()
            .filter(|c| c.key.classifier == cls)
            .map(|c| c.key.subset_size)
            .max()
            .unwrap_or(0);
        let mut text = String::from("subset_size");
        for &algo in &algorithms {
            text.push_str(&format!("\t{}", algo.tag()));
        }
        text.push_str("\tfull\n");
        let full_auc = result.baseline(cls).map(|b| b.mean.auc).unwrap_or(f64::NAN);
        for k in 1..=max_k {
            text.push_str(&k.to_string());
            for &algo in &algorithms {
                match result.cell(algo, cls, k) {
                    Some(cell) if cell.error.is_none() => {
                        text.push_str(&format!("\t{:.6}", cell.mean.auc));
                    }
                    _ => text.push_str("\tnan"),
                }
            }
            text.push_str(&format!("\t{full_auc:.6}\n"));
        }
        let path = curves_dir.join(format!("{}.tsv", cls.tag()));
        write_file(&path, &text)?;
        written.push(path);
    }

    let json_path = out_dir.join("sweep_result.json");
    write_file(&json_path, &serde_json::to_string_pretty(result)?)?;
    written.push(json_path);
    Ok(written)
}

/// audit.csv, sorted by single-feature AUC descending.
pub fn write_audit(out_dir: &Path, report: &AuditReport) -> Result<PathBuf> {
    if report.entries.is_empty() {
        return Err(Error::Empty("audit produced no entries"));
    }
    create_dir(out_dir)?;
    let mut text = String::from("feature,auc_single,auc_full,delta,flagged\n");
    for e in &report.entries {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{}\n",
            e.feature_name, e.auc_single, report.auc_full, report.delta, e.flagged
        ));
    }
    let path = out_dir.join("audit.csv");
    write_file(&path, &text)?;
    Ok(path)
}

/// run_manifest.json: the resolved plan, seed, and crate version.
pub fn write_manifest(out_dir: &Path, plan: &ExperimentPlan) -> Result<PathBuf> {
    create_dir(out_dir)?;
    #[derive(Serialize)]
    struct Manifest<'a> {
        version: &'static str,
        plan: &'a ExperimentPlan,
        seed: u64,
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        plan,
        seed: plan.seed,
    };
    let path = out_dir.join("run_manifest.json");
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Writes a synthetic dataset as CSV (features plus a final Label column).
pub fn write_synthetic_csv(path: &Path, table: &FeatureTable, y: &LabelVector) -> Result<()> {
    let mut text = String::new();
    text.push_str(&table.feature_names.join(","));
    text.push_str(",Label\n");
    for r in 0..table.n_rows() {
        for (j, v) in table.row(r).iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("{v}"));
        }
        text.push_str(&format!(",{}\n", y.get(r)));
    }
    write_file(path, &text)
}
