//! Binary classifiers: a deep feed-forward network and a random forest,
//! both emitting attack-probability scores in [0,1].

pub mod dff;
pub mod rf;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, LabelVector};
use crate::error::{Error, Result};

pub use dff::{gradient_check, predict_dff, train_dff, DffConfig, DffModel};
pub use rf::{predict_rf, train_rf, RfConfig, RfModel};

/// Per-row attack probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        debug_assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
        ScoreVector { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Dff,
    Rf,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::Dff, ClassifierKind::Rf];

    pub fn tag(&self) -> &'static str {
        match self {
            ClassifierKind::Dff => "dff",
            ClassifierKind::Rf => "rf",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dff" | "dnn" => Ok(ClassifierKind::Dff),
            "rf" | "forest" => Ok(ClassifierKind::Rf),
            other => Err(Error::Config(format!("unknown classifier {other:?}"))),
        }
    }
}

/// A fitted classifier of either kind, with a uniform predict surface and a
/// versioned JSON serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Dff(DffModel),
    Rf(RfModel),
}

/// Bumped whenever the serialized layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::Dff(_) => ClassifierKind::Dff,
            TrainedModel::Rf(_) => ClassifierKind::Rf,
        }
    }

    pub fn predict(&self, x: &FeatureTable) -> Result<ScoreVector> {
        match self {
            TrainedModel::Dff(m) => predict_dff(m, x),
            TrainedModel::Rf(m) => predict_rf(m, x),
        }
    }

    pub fn train(
        kind: ClassifierKind,
        x: &FeatureTable,
        y: &LabelVector,
        dff_cfg: &DffConfig,
        rf_cfg: &RfConfig,
        seed: u64,
    ) -> Result<TrainedModel> {
        match kind {
            ClassifierKind::Dff => {
                let cfg = DffConfig { seed, ..dff_cfg.clone() };
                Ok(TrainedModel::Dff(train_dff(x, y, &cfg)?))
            }
            ClassifierKind::Rf => {
                let cfg = RfConfig { seed, ..rf_cfg.clone() };
                Ok(TrainedModel::Rf(train_rf(x, y, &cfg)?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    fn toy_data(seed: u64, n: usize, d: usize) -> (FeatureTable, LabelVector) {
        let mut rng = seeding::rng(seed);
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c: u8 = u8::from(rng.random_bool(0.5));
            labels.push(c);
            for j in 0..d {
                let base = if j == 0 { f64::from(c) * 0.6 } else { 0.0 };
                values.push((base + rng.random_range(0.0..0.4)).clamp(0.0, 1.0));
            }
        }
        labels[0] = 0;
        labels[1] = 1;
        let names = (0..d).map(|j| format!("f{j}")).collect();
        (FeatureTable::new(values, n, names), LabelVector::new(labels))
    }

    #[test]
    fn serialization_round_trip_is_bit_identical() {
        let (x, y) = toy_data(5, 60, 3);
        for kind in ClassifierKind::ALL {
            let model = TrainedModel::train(
                kind,
                &x,
                &y,
                &DffConfig { epochs: 3, ..DffConfig::default() },
                &RfConfig { n_trees: 5, ..RfConfig::default() },
                11,
            )
            .unwrap();
            let json = model.to_json().unwrap();
            let restored = TrainedModel::from_json(&json).unwrap();
            let before = model.predict(&x).unwrap();
            let after = restored.predict(&x).unwrap();
            let bits = |s: &ScoreVector| {
                s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            };
            assert_eq!(bits(&before), bits(&after), "{kind:?}");
        }
    }

    #[test]
    fn rejects_future_format_version() {
        let (x, y) = toy_data(5, 40, 2);
        let model = TrainedModel::train(
            ClassifierKind::Rf,
            &x,
            &y,
            &DffConfig::default(),
            &RfConfig { n_trees: 2, ..RfConfig::default() },
            1,
        )
        .unwrap();
        let json = model
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(TrainedModel::from_json(&json).is_err());
    }
}
