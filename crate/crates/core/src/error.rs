use std::path::PathBuf;
use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv parse failure in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("column spec does not match header: {0}")]
    SchemaMismatch(String),

    #[error("dataset must contain exactly one label column, found {0}")]
    LabelColumn(usize),

    #[error("column {column} row {row}: cannot parse {value:?} as a number")]
    BadNumber {
        column: String,
        row: usize,
        value: String,
    },

    #[error("column {column} row {row}: label value {value:?} is neither benign nor a known attack value")]
    BadLabel {
        column: String,
        row: usize,
        value: String,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("labels contain a single class; both classes are required")]
    SingleClass,

    #[error("class {class} has {count} samples, need at least {need}")]
    ClassTooSmall {
        class: u8,
        count: usize,
        need: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("feature value {value} at row {row}, column {column} is negative")]
    NegativeFeature {
        row: usize,
        column: usize,
        value: f64,
    },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("unknown feature name: {0}")]
    UnknownFeature(String),

    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
