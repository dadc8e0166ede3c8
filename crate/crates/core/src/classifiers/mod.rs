//! Six classifiers behind one train/predict contract.
//!
//! Every model produces one score per training class; the prediction is the
//! arg-max, with ties going to the lowest polarity code. Classes are kept in
//! ascending code order throughout, so "first maximum" is that tie-break.

pub mod forest;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod mnb;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Polarity;
use crate::features::SparseVector;

pub use forest::{ForestConfig, ForestModel, MaxFeatures};
pub use knn::{DistanceMetric, KnnConfig, KnnModel};
pub use linear::{LinearModel, LinearSvcConfig, LogRegConfig, Penalty};
pub use mlp::{MlpConfig, MlpModel, Optimizer};
pub use mnb::{MnbConfig, MnbModel};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("{kind} needs at least 2 classes, training data has {found}")]
    InsufficientClasses { kind: ClassifierKind, found: usize },
    #[error("row references feature {index} but the model has {n_features} features")]
    FeatureSpaceMismatch { index: u32, n_features: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model schema version {found} not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Sparse rows with their labels over a fixed feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseVector>,
    labels: Vec<Polarity>,
    n_features: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVector>, labels: Vec<Polarity>, n_features: usize) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::InvalidDataset("no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(ModelError::InvalidDataset(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some((r, m)) = rows
            .iter()
            .enumerate()
            .filter_map(|(r, row)| row.max_index().map(|m| (r, m)))
            .find(|&(_, m)| m as usize >= n_features)
        {
            return Err(ModelError::InvalidDataset(format!("row {r} references feature {m} >= {n_features}")));
        }
        Ok(Dataset { rows, labels, n_features })
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Polarity] {
        &self.labels
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct labels, ascending by code.
    pub fn classes(&self) -> Vec<Polarity> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    /// Label of each row as an index into [`Dataset::classes`].
    pub(crate) fn class_indices(&self, classes: &[Polarity]) -> Vec<usize> {
        self.labels.iter().map(|l| classes.iter().position(|c| c == l).expect("label among classes")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "mnb")]
    Mnb,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "lsvc")]
    LinearSvc,
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "logreg")]
    LogReg,
    #[serde(rename = "mlp")]
    Mlp,
}

impl ClassifierKind {
    /// Report order: MNB, RF, LSVC, KNN, LR, MLP.
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Mnb,
        ClassifierKind::RandomForest,
        ClassifierKind::LinearSvc,
        ClassifierKind::Knn,
        ClassifierKind::LogReg,
        ClassifierKind::Mlp,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            ClassifierKind::Mnb => "mnb",
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::LinearSvc => "lsvc",
            ClassifierKind::Knn => "knn",
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::Mlp => "mlp",
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            ClassifierKind::Mnb => "MNB",
            ClassifierKind::RandomForest => "RF",
            ClassifierKind::LinearSvc => "LSVC",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::LogReg => "LR",
            ClassifierKind::Mlp => "MLP",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.cli_name().eq_ignore_ascii_case(s) || k.abbreviation().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown classifier {s:?} (expected mnb|logreg|lsvc|knn|rf|mlp)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub mnb: MnbConfig,
    pub logreg: LogRegConfig,
    pub lsvc: LinearSvcConfig,
    pub knn: KnnConfig,
    pub rf: ForestConfig,
    pub mlp: MlpConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.mnb.alpha) {
            return bad("mnb.alpha must be > 0");
        }
        if !pos(self.logreg.c) || !pos(self.lsvc.c) {
            return bad("regularization strength C must be > 0");
        }
        if !pos(self.logreg.learning_rate) || !pos(self.mlp.learning_rate) {
            return bad("learning rates must be > 0");
        }
        if self.logreg.max_epochs == 0 || self.lsvc.max_iter == 0 || self.mlp.max_epochs == 0 {
            return bad("iteration counts must be >= 1");
        }
        if self.knn.k == 0 {
            return bad("knn.k must be >= 1");
        }
        if self.rf.n_trees == 0 {
            return bad("rf.n_trees must be >= 1");
        }
        if self.rf.min_samples_split < 2 {
            return bad("rf.min_samples_split must be >= 2");
        }
        if matches!(self.rf.max_features, MaxFeatures::Fixed(0)) {
            return bad("rf.max_features must be >= 1");
        }
        if self.mlp.hidden_units == 0 || self.mlp.batch_size == Some(0) {
            return bad("mlp sizes must be >= 1");
        }
        Ok(())
    }
}

/// A fitted classifier. Serialized as `{"variant": …, "classes": […], …params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TrainedModel {
    Mnb(MnbModel),
    LogReg(LinearModel),
    LinearSvc(LinearModel),
    Knn(KnnModel),
    RandomForest(ForestModel),
    Mlp(MlpModel),
}

pub fn train(kind: ClassifierKind, data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    cfg.validate()?;
    Ok(match kind {
        ClassifierKind::Mnb => TrainedModel::Mnb(mnb::train(data, &cfg.mnb)),
        ClassifierKind::LogReg => TrainedModel::LogReg(linear::train_logreg(data, &cfg.logreg)?),
        ClassifierKind::LinearSvc => TrainedModel::LinearSvc(linear::train_linear_svc(data, &cfg.lsvc, cfg.seed)?),
        ClassifierKind::Knn => TrainedModel::Knn(knn::train(data, &cfg.knn)),
        ClassifierKind::RandomForest => TrainedModel::RandomForest(forest::train(data, &cfg.rf, cfg.seed)),
        ClassifierKind::Mlp => TrainedModel::Mlp(mlp::train(data, &cfg.mlp, cfg.seed)?),
    })
}

pub fn train_mnb(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::Mnb, data, cfg)
}

pub fn train_logreg(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::LogReg, data, cfg)
}

pub fn train_linear_svc(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::LinearSvc, data, cfg)
}

pub fn train_knn(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::Knn, data, cfg)
}

pub fn train_random_forest(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::RandomForest, data, cfg)
}

pub fn train_mlp(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train(ClassifierKind::Mlp, data, cfg)
}

/// Scores this close to the maximum count as tied with it.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the first score within [`TIE_TOLERANCE`] of the maximum,
/// relative and floored at 1. Exact ties that rounding split by an ulp or two still
/// go to the lowest class code.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * max.abs().max(1.0);
    scores.iter().position(|&s| s >= max - tol).unwrap_or(0)
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::Mnb(_) => ClassifierKind::Mnb,
            TrainedModel::LogReg(_) => ClassifierKind::LogReg,
            TrainedModel::LinearSvc(_) => ClassifierKind::LinearSvc,
            TrainedModel::Knn(_) => ClassifierKind::Knn,
            TrainedModel::RandomForest(_) => ClassifierKind::RandomForest,
            TrainedModel::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn classes(&self) -> &[Polarity] {
        match self {
            TrainedModel::Mnb(m) => &m.classes,
            TrainedModel::LogReg(m) | TrainedModel::LinearSvc(m) => &m.classes,
            TrainedModel::Knn(m) => &m.classes,
            TrainedModel::RandomForest(m) => &m.classes,
            TrainedModel::Mlp(m) => &m.classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Mnb(m) => m.n_features,
            TrainedModel::LogReg(m) | TrainedModel::LinearSvc(m) => m.n_features,
            TrainedModel::Knn(m) => m.n_features,
            TrainedModel::RandomForest(m) => m.n_features,
            TrainedModel::Mlp(m) => m.params.n_features,
        }
    }

    fn check_row(&self, row: &SparseVector) -> Result<(), ModelError> {
        match row.max_index() {
            Some(i) if i as usize >= self.n_features() => {
                Err(ModelError::FeatureSpaceMismatch { index: i, n_features: self.n_features() })
            }
            _ => Ok(()),
        }
    }

    /// One score per class in [`TrainedModel::classes`] order.
    pub fn scores(&self, row: &SparseVector) -> Result<Vec<f64>, ModelError> {
        self.check_row(row)?;
        Ok(match self {
            TrainedModel::Mnb(m) => m.scores(row),
            TrainedModel::LogReg(m) | TrainedModel::LinearSvc(m) => m.scores(row),
            TrainedModel::Knn(m) => m.scores(row),
            TrainedModel::RandomForest(m) => m.scores(row),
            TrainedModel::Mlp(m) => m.scores(row),
        })
    }

    pub fn predict(&self, row: &SparseVector) -> Result<Polarity, ModelError> {
        let scores = self.scores(row)?;
        Ok(self.classes()[argmax(&scores)])
    }

    /// Predicts many rows, in parallel when enabled.
    pub fn predict_batch(&self, rows: &[SparseVector]) -> Result<Vec<Polarity>, ModelError> {
        crate::par::map(rows, |r| self.predict(r)).into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        let envelope = ModelFileRef { schema_version: MODEL_SCHEMA_VERSION, model: self };
        serde_json::to_string(&envelope).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        check_schema_version(&value)?;
        let mut value = value;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("schema_version");
        }
        serde_json::from_value(value).map_err(|e| ModelError::CorruptModel(e.to_string()))
    }
}

pub(crate) fn check_schema_version(value: &serde_json::Value) -> Result<(), ModelError> {
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelError::CorruptModel("missing schema_version".into()))?;
    if found != u64::from(MODEL_SCHEMA_VERSION) {
        return Err(ModelError::SchemaVersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    model: &'a TrainedModel,
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model.to_json()).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    TrainedModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e: &[(u32, f64)]) -> SparseVector {
        SparseVector::new(e.to_vec()).unwrap()
    }

    fn toy() -> Dataset {
        Dataset::new(
            vec![row(&[(0, 2.0)]), row(&[(1, 1.0)]), row(&[(0, 1.0), (2, 1.0)]), row(&[(1, 2.0), (2, 1.0)])],
            vec![Polarity::Positive, Polarity::Negative, Polarity::Positive, Polarity::Negative],
            3,
        )
        .unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], vec![], 3).is_err());
        assert!(Dataset::new(vec![row(&[(0, 1.0)])], vec![], 3).is_err());
        assert!(Dataset::new(vec![row(&[(3, 1.0)])], vec![Polarity::Neutral], 3).is_err());
        assert_eq!(toy().classes(), vec![Polarity::Positive, Polarity::Negative]);
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        // ln(1/4) + ln(2/3) and ln(1/3) + ln(1/2) are equal in exact arithmetic.
        let a = 0.25f64.ln() + (2.0f64 / 3.0).ln();
        let b = (1.0f64 / 3.0).ln() + 0.5f64.ln();
        assert_eq!(argmax(&[b, a]), 0);
        assert_eq!(argmax(&[a, b]), 0);
        assert_eq!(argmax(&[-1.0, -1.0 + 1e-9]), 1);
    }

    #[test]
    fn every_model_rejects_out_of_range_rows_and_is_pure() {
        let cfg = TrainConfig { rf: ForestConfig { n_trees: 5, ..Default::default() }, ..Default::default() };
        for kind in ClassifierKind::ALL {
            let m = train(kind, &toy(), &cfg).unwrap();
            assert_eq!(m.kind(), kind);
            assert!(matches!(
                m.predict(&row(&[(3, 1.0)])),
                Err(ModelError::FeatureSpaceMismatch { index: 3, n_features: 3 })
            ));
            let probe = row(&[(0, 1.0), (1, 1.0)]);
            assert_eq!(m.predict(&probe).unwrap(), m.predict(&probe).unwrap());
            assert!(m.classes().contains(&m.predict(&probe).unwrap()));
        }
    }

    #[test]
    fn config_validation_and_defaults() {
        let d = TrainConfig::default();
        assert_eq!(d.logreg.c, 1.0);
        assert_eq!(d.lsvc.c, 1.0);
        assert_eq!(d.lsvc.max_iter, 1500);
        assert_eq!(d.mnb.alpha, 1.0);
        assert!(d.validate().is_ok());
        let bad = TrainConfig { knn: KnnConfig { k: 0, ..Default::default() }, ..Default::default() };
        assert!(train(ClassifierKind::Knn, &toy(), &bad).is_err());
        let parsed: TrainConfig =
            toml::from_str("seed = 9\n[lsvc]\npenalty = \"l1\"\n[rf]\nn_trees = 7\nmax_features = \"log2\"\n").unwrap();
        assert_eq!(parsed.seed, 9);
        assert_eq!(parsed.lsvc.penalty, Penalty::L1);
        assert_eq!(parsed.lsvc.max_iter, 1500);
        assert_eq!(parsed.rf.n_trees, 7);
    }

    #[test]
    fn schema_errors() {
        let m = train(ClassifierKind::Mnb, &toy(), &TrainConfig::default()).unwrap();
        let text = m.to_json();
        assert!(text.starts_with("{\"schema_version\":1,\"variant\":\"mnb\""));
        assert_eq!(TrainedModel::from_json(&text).unwrap(), m);
        assert!(matches!(TrainedModel::from_json(&text[..text.len() / 2]), Err(ModelError::CorruptModel(_))));
        let v0 = text.replacen("\"schema_version\":1", "\"schema_version\":0", 1);
        assert!(matches!(
            TrainedModel::from_json(&v0),
            Err(ModelError::SchemaVersionMismatch { found: 0, expected: 1 })
        ));
    }

    #[test]
    fn kinds_parse() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.cli_name().parse::<ClassifierKind>().unwrap(), k);
        }
        assert!("svm".parse::<ClassifierKind>().is_err());
    }
}
