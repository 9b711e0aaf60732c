//! CSV ingestion and preprocessing: identifier dropping, label encoding,
//! sanitization, min-max normalization, and stratified splits/folds.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// What a column holds, and how preprocessing treats it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Flow ids, timestamps, addresses and ports. Dropped before training
    /// to avoid bias towards attacking/victim nodes.
    Identifier,
    Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub position: usize,
}

/// Raw, still-textual dataset as read from disk.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<String>>,
    pub source: PathBuf,
    pub warnings: Vec<String>,
}

impl RawDataset {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn label_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Label)
    }
}

/// Numeric feature matrix, row-major, with provenance notes of every
/// transform applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    values: Vec<f64>,
    n_rows: usize,
    pub feature_names: Vec<String>,
    pub provenance: Vec<String>,
}

impl FeatureTable {
    pub fn new(values: Vec<f64>, n_rows: usize, feature_names: Vec<String>) -> Self {
        assert_eq!(values.len(), n_rows * feature_names.len());
        FeatureTable {
            values,
            n_rows,
            feature_names,
            provenance: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let d = self.n_features();
        self.values[row * d + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        let d = self.n_features();
        self.values[col..].iter().step_by(d).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New table holding only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureTable {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            for &c in cols {
                values.push(row[c]);
            }
        }
        let names = cols.iter().map(|&c| self.feature_names[c].clone()).collect();
        FeatureTable {
            values,
            n_rows: self.n_rows,
            feature_names: names,
            provenance: self.provenance.clone(),
        }
    }

    /// New table holding only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let d = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureTable {
            values,
            n_rows: rows.len(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// Binary attack/benign labels, row-aligned with a `FeatureTable`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<u8>,
}

impl LabelVector {
    pub fn new(labels: Vec<u8>) -> Self {
        assert!(labels.iter().all(|&l| l <= 1));
        LabelVector { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector {
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positive_count();
        p > 0 && p < self.labels.len()
    }
}

/// Per-feature min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Seeded 70/30-style stratified holdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Describes one dataset: which column is the label, which values mean
/// attack, and which columns are identifiers. Parsed from a plain-text
/// key-value profile file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub label_column: Option<String>,
    pub attack_values: Vec<String>,
    pub identifier_columns: Vec<String>,
    pub delimiter: u8,
}

impl Default for DatasetProfile {
    fn default() -> Self {
        DatasetProfile {
            label_column: None,
            attack_values: Vec::new(),
            identifier_columns: Vec::new(),
            delimiter: b',',
        }
    }
}

/// Column names treated as identifiers when inferring a spec. Covers the
/// aliases used across the common NetFlow-style benchmark datasets.
pub const DEFAULT_IDENTIFIER_NAMES: &[&str] = &[
    "id",
    "flow id",
    "flow_id",
    "timestamp",
    "time",
    "stime",
    "ltime",
    "srcip",
    "dstip",
    "src_ip",
    "dst_ip",
    "source ip",
    "destination ip",
    "ipv4_src_addr",
    "ipv4_dst_addr",
    "sport",
    "dsport",
    "src_port",
    "dst_port",
    "source port",
    "destination port",
    "l4_src_port",
    "l4_dst_port",
];

/// Column names recognized as the label when inferring a spec.
pub const DEFAULT_LABEL_NAMES: &[&str] = &["label", "attack", "class"];

impl DatasetProfile {
    /// Parses a `key = value` profile document. Lists are comma-separated.
    /// Keys: label_column, attack_values, identifier_columns, delimiter.
    pub fn parse(text: &str) -> Result<DatasetProfile> {
        let mut profile = DatasetProfile::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("profile line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "label_column" => profile.label_column = Some(value.to_string()),
                "attack_values" => {
                    profile.attack_values =
                        value.split(',').map(|v| v.trim().to_string()).collect();
                }
                "identifier_columns" => {
                    profile.identifier_columns = value
                        .split(',')
                        .map(|v| v.trim().to_string())
                        .filter(|v| !v.is_empty())
                        .collect();
                }
                "delimiter" => {
                    let bytes = value.as_bytes();
                    if bytes.len() != 1 {
                        return Err(Error::Config(format!(
                            "delimiter must be a single character, got {value:?}"
                        )));
                    }
                    profile.delimiter = bytes[0];
                }
                other => {
                    return Err(Error::Config(format!(
                        "profile line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<DatasetProfile> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        DatasetProfile::parse(&text)
    }
}

/// Column spec source for `load_csv`.
#[derive(Debug, Clone)]
pub enum SpecSource {
    Explicit(Vec<ColumnSpec>),
    /// Columns parseable as numbers on every non-empty cell become numeric,
    /// the rest categorical; identifier/label kinds are matched by name
    /// against the profile (falling back to the built-in name lists).
    Infer(DatasetProfile),
}

/// Reads an RFC-4180-style CSV with a header row.
pub fn load_csv(path: &Path, spec: SpecSource) -> Result<RawDataset> {
    let delimiter = match &spec {
        SpecSource::Infer(profile) => profile.delimiter,
        SpecSource::Explicit(_) => b',',
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(file);

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let m = header.len();

    {
        let mut seen = std::collections::BTreeSet::new();
        for name in &header {
            if !seen.insert(name.clone()) {
                return Err(Error::SchemaMismatch(format!("duplicate column {name:?}")));
            }
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if record.len() != m {
            // header is line 1, data starts at line 2
            return Err(Error::RaggedRow {
                row: i + 2,
                found: record.len(),
                expected: m,
            });
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }

    let columns = match spec {
        SpecSource::Explicit(specs) => {
            if specs.len() != m {
                return Err(Error::SchemaMismatch(format!(
                    "spec has {} columns, header has {m}",
                    specs.len()
                )));
            }
            for (i, s) in specs.iter().enumerate() {
                if s.name != header[i] {
                    return Err(Error::SchemaMismatch(format!(
                        "column {i}: spec says {:?}, header says {:?}",
                        s.name, header[i]
                    )));
                }
            }
            specs
        }
        SpecSource::Infer(profile) => infer_columns(&header, &rows, &profile)?,
    };

    let label_count = columns
        .iter()
        .filter(|c| c.kind == ColumnKind::Label)
        .count();
    if label_count != 1 {
        return Err(Error::LabelColumn(label_count));
    }

    Ok(RawDataset {
        columns,
        rows,
        source: path.to_path_buf(),
        warnings: Vec::new(),
    })
}

fn infer_columns(
    header: &[String],
    rows: &[Vec<String>],
    profile: &DatasetProfile,
) -> Result<Vec<ColumnSpec>> {
    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let lower = name.to_ascii_lowercase();
        let is_label = match &profile.label_column {
            Some(l) => name == l || lower == l.to_ascii_lowercase(),
            None => DEFAULT_LABEL_NAMES.contains(&lower.as_str()),
        };
        let is_identifier = if profile.identifier_columns.is_empty() {
            DEFAULT_IDENTIFIER_NAMES.contains(&lower.as_str())
        } else {
            profile
                .identifier_columns
                .iter()
                .any(|c| c == name || c.to_ascii_lowercase() == lower)
        };
        let kind = if is_label {
            ColumnKind::Label
        } else if is_identifier {
            ColumnKind::Identifier
        } else {
            let numeric = rows
                .iter()
                .map(|r| r[j].as_str())
                .filter(|c| !c.is_empty())
                .all(|c| c.parse::<f64>().is_ok());
            if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        };
        columns.push(ColumnSpec {
            name: name.clone(),
            kind,
            position: j,
        });
    }
    Ok(columns)
}

/// Removes every identifier column. The label column is never dropped.
pub fn drop_identifiers(raw: RawDataset) -> RawDataset {
    let keep: Vec<usize> = raw
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != ColumnKind::Identifier)
        .map(|(i, _)| i)
        .collect();
    if keep.len() == raw.columns.len() {
        return raw;
    }
    let mut warnings = raw.warnings.clone();
    let feature_cols = keep
        .iter()
        .filter(|&&i| raw.columns[i].kind != ColumnKind::Label)
        .count();
    if feature_cols == 0 {
        warnings.push("all non-label columns were identifiers; nothing left to train on".into());
    }
    let columns = keep
        .iter()
        .enumerate()
        .map(|(new_pos, &i)| ColumnSpec {
            name: raw.columns[i].name.clone(),
            kind: raw.columns[i].kind,
            position: new_pos,
        })
        .collect();
    let rows = raw
        .rows
        .iter()
        .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
        .collect();
    RawDataset {
        columns,
        rows,
        source: raw.source,
        warnings,
    }
}

/// Label-encodes categoricals (codes by sorted lexicographic order of the
/// distinct values) and maps the label column to {0, 1}.
///
/// A label cell is 1 when its value is in `attack_values` or parses as the
/// number 1; in strict mode anything else than a recognized benign value
/// (0, or absent from attack_values) errors out.
pub fn encode(
    raw: &RawDataset,
    attack_values: &[String],
    strict: bool,
) -> Result<(FeatureTable, LabelVector)> {
    let label_col = raw
        .columns
        .iter()
        .position(|c| c.kind == ColumnKind::Label)
        .ok_or(Error::LabelColumn(0))?;

    let feature_cols: Vec<&ColumnSpec> = raw
        .columns
        .iter()
        .filter(|c| c.kind != ColumnKind::Label)
        .collect();
    let n = raw.rows.len();
    let d = feature_cols.len();

    // per categorical column: value -> code, by sorted distinct values
    let mut code_maps: Vec<Option<BTreeMap<&str, f64>>> = Vec::with_capacity(d);
    for col in &feature_cols {
        if col.kind == ColumnKind::Categorical {
            let mut distinct: Vec<&str> =
                raw.rows.iter().map(|r| r[col.position].as_str()).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let map = distinct
                .into_iter()
                .enumerate()
                .map(|(code, v)| (v, code as f64))
                .collect();
            code_maps.push(Some(map));
        } else {
            code_maps.push(None);
        }
    }

    let mut values = Vec::with_capacity(n * d);
    for (i, row) in raw.rows.iter().enumerate() {
        for (jj, col) in feature_cols.iter().enumerate() {
            let cell = row[col.position].as_str();
            let v = match &code_maps[jj] {
                Some(map) => map[cell],
                None => {
                    if cell.is_empty() {
                        f64::NAN
                    } else {
                        cell.parse::<f64>().map_err(|_| Error::BadNumber {
                            column: col.name.clone(),
                            row: i + 2,
                            value: cell.to_string(),
                        })?
                    }
                }
            };
            values.push(v);
        }
    }

    let mut labels = Vec::with_capacity(n);
    for (i, row) in raw.rows.iter().enumerate() {
        let cell = row[label_col].as_str();
        let is_attack =
            attack_values.iter().any(|v| v == cell) || cell.parse::<f64>() == Ok(1.0);
        let is_benign = cell.parse::<f64>() == Ok(0.0)
            || cell.eq_ignore_ascii_case("benign")
            || cell.eq_ignore_ascii_case("normal");
        if strict && !is_attack && !is_benign {
            return Err(Error::BadLabel {
                column: raw.columns[label_col].name.clone(),
                row: i + 2,
                value: cell.to_string(),
            });
        }
        labels.push(u8::from(is_attack));
    }

    let mut table = FeatureTable::new(
        values,
        n,
        feature_cols.iter().map(|c| c.name.clone()).collect(),
    );
    table.provenance.push(format!(
        "encoded {} categorical columns by sorted-lexicographic codes",
        code_maps.iter().filter(|m| m.is_some()).count()
    ));
    Ok((table, LabelVector::new(labels)))
}

/// What to do with NaN/±inf cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SanitizePolicy {
    /// Replace with 0.0; keeps row alignment with the labels.
    Zero,
    /// Drop every row containing a non-finite cell.
    DropRow,
}

/// Replaces non-finite cells per the default zero policy.
pub fn sanitize(table: &FeatureTable) -> FeatureTable {
    let (out, _) = sanitize_with(table, SanitizePolicy::Zero);
    out
}

/// Sanitizes with an explicit policy. Returns the kept row indices so the
/// caller can realign labels under `DropRow`.
pub fn sanitize_with(table: &FeatureTable, policy: SanitizePolicy) -> (FeatureTable, Vec<usize>) {
    match policy {
        SanitizePolicy::Zero => {
            let mut out = table.clone();
            let mut replaced = 0usize;
            for v in &mut out.values {
                if !v.is_finite() {
                    *v = 0.0;
                    replaced += 1;
                }
            }
            if replaced > 0 {
                out.provenance
                    .push(format!("sanitize: replaced {replaced} non-finite cells with 0.0"));
            }
            (out, (0..table.n_rows()).collect())
        }
        SanitizePolicy::DropRow => {
            let kept: Vec<usize> = (0..table.n_rows())
                .filter(|&r| table.row(r).iter().all(|v| v.is_finite()))
                .collect();
            let mut out = table.select_rows(&kept);
            let dropped = table.n_rows() - kept.len();
            if dropped > 0 {
                out.provenance
                    .push(format!("sanitize: dropped {dropped} rows with non-finite cells"));
            }
            (out, kept)
        }
    }
}

/// Per-column min/max over all rows of a sanitized table.
pub fn minmax_fit(table: &FeatureTable) -> Result<NormStats> {
    if table.n_rows() == 0 {
        return Err(Error::Empty("cannot fit normalization on an empty table"));
    }
    let d = table.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for r in 0..table.n_rows() {
        let row = table.row(r);
        for j in 0..d {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    Ok(NormStats { min, max })
}

/// Scales to [0,1] with the fitted stats. Constant columns map to 0.0;
/// out-of-range values (test rows) are clipped.
pub fn minmax_apply(table: &FeatureTable, stats: &NormStats) -> Result<FeatureTable> {
    let d = table.n_features();
    if stats.min.len() != d {
        return Err(Error::Dimension {
            expected: stats.min.len(),
            found: d,
        });
    }
    let mut out = table.clone();
    for r in 0..out.n_rows() {
        for j in 0..d {
            let range = stats.max[j] - stats.min[j];
            let v = if range == 0.0 {
                0.0
            } else {
                ((out.get(r, j) - stats.min[j]) / range).clamp(0.0, 1.0)
            };
            out.set(r, j, v);
        }
    }
    out.provenance.push("min-max normalized to [0,1]".into());
    Ok(out)
}

fn class_indices(labels: &LabelVector) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        by_class[l as usize].push(i);
    }
    by_class
}

/// Seeded stratified holdout: within each class, a shuffled prefix of
/// round(ratio * class_count) rows goes to train.
pub fn stratified_split(labels: &LabelVector, ratio: f64, seed: u64) -> Result<SplitPlan> {
    if !(0.0..1.0).contains(&ratio) || ratio == 0.0 {
        return Err(Error::Config(format!("split ratio {ratio} not in (0,1)")));
    }
    let by_class = class_indices(labels);
    for (class, idx) in by_class.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count: idx.len(),
                need: 2,
            });
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, idx) in by_class.iter().enumerate() {
        let mut shuffled = idx.clone();
        let mut rng = seeding::rng(seeding::subseed(seed, "split", class as u64));
        shuffled.shuffle(&mut rng);
        let n_train = (ratio * shuffled.len() as f64).round() as usize;
        train.extend_from_slice(&shuffled[..n_train]);
        test.extend_from_slice(&shuffled[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
        ratio,
    })
}

/// Seeded stratified k-fold: per class, shuffle then assign round-robin.
pub fn stratified_kfold(labels: &LabelVector, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need k >= 2")));
    }
    let by_class = class_indices(labels);
    for (class, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count: idx.len(),
                need: k,
            });
        }
    }
    let mut assignments = vec![0usize; labels.len()];
    for (class, idx) in by_class.iter().enumerate() {
        let mut shuffled = idx.clone();
        let mut rng = seeding::rng(seeding::subseed(seed, "folds", class as u64));
        shuffled.shuffle(&mut rng);
        for (pos, &row) in shuffled.iter().enumerate() {
            assignments[row] = pos % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
