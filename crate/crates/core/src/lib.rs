//! Feature-ranking and classification toolkit for binary network flow
//! datasets: filter-style feature scoring (chi-square, information gain,
//! correlation), two reference classifiers, evaluation metrics, and a
//! deterministic experiment harness with a hidden-label audit.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seeding;
pub mod selection;

pub use dataset::{DatasetProfile, FeatureTable, LabelVector};
pub use error::{Error, Result};
pub use harness::{AuditReport, ExperimentPlan, EvalMode, SweepResult, SyntheticSpec};
pub use metrics::{ConfusionCounts, MetricsReport};
pub use model::{ClassifierKind, DffConfig, RfConfig, ScoreVector, TrainedModel};
pub use selection::{Algorithm, FeatureRanking, FeatureScore};
