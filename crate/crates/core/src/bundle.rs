//! A trained model saved together with the exact preprocessing and
//! vocabulary it was trained with, so raw text can be scored later without
//! train/serve skew.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierKind, Dataset, ModelError, TrainConfig, TrainedModel};
use crate::corpus::{Corpus, Polarity};
use crate::features::{FeatureError, NgramRange, SparseVector, Vocabulary, WeightingScheme};
use crate::preprocess::{Lexicon, Pipeline, PipelineConfig, PreprocessError};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("model bundle is missing `{0}`")]
    BundleIncomplete(&'static str),
    #[error("bundle schema version {found} not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("corrupt bundle: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pipeline: Pipeline,
    vocabulary: Vocabulary,
    weighting: WeightingScheme,
    model: TrainedModel,
}

/// Predicted label plus one score per training class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Polarity,
    pub scores: Vec<(Polarity, f64)>,
}

#[derive(Serialize)]
struct BundleFileRef<'a> {
    schema_version: u32,
    pipeline: &'a PipelineConfig,
    lexicon: &'a Lexicon,
    weighting: WeightingScheme,
    vocabulary: &'a Vocabulary,
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct BundleFile {
    pipeline: Option<PipelineConfig>,
    lexicon: Option<Lexicon>,
    weighting: Option<WeightingScheme>,
    vocabulary: Option<serde_json::Value>,
    model: Option<serde_json::Value>,
}

impl ModelBundle {
    pub fn new(pipeline: Pipeline, vocabulary: Vocabulary, weighting: WeightingScheme, model: TrainedModel) -> Self {
        ModelBundle { pipeline, vocabulary, weighting, model }
    }

    /// Preprocesses `corpus`, builds the vocabulary on it and fits `kind`.
    pub fn fit(
        corpus: &Corpus,
        pipeline: Pipeline,
        range: NgramRange,
        weighting: WeightingScheme,
        kind: ClassifierKind,
        cfg: &TrainConfig,
    ) -> Result<Self, BundleError> {
        let texts: Vec<&str> = corpus.documents().iter().map(|d| d.text.as_str()).collect();
        let tokens = pipeline.run_batch(&texts);
        let vocabulary = Vocabulary::build(&tokens, range)?;
        let rows = vocabulary.vectorize_batch(&tokens, weighting);
        let data = Dataset::new(rows, corpus.labels(), vocabulary.len())?;
        let model = classifiers::train(kind, &data, cfg)?;
        Ok(ModelBundle::new(pipeline, vocabulary, weighting, model))
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn weighting(&self) -> WeightingScheme {
        self.weighting
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// The feature row the model sees for `raw_text`; unknown n-grams are dropped.
    pub fn featurize(&self, raw_text: &str) -> SparseVector {
        let tokens = self.pipeline.run(raw_text);
        self.vocabulary
            .vectorize(&tokens, self.vocabulary.range(), self.weighting)
            .expect("range taken from the vocabulary")
    }

    pub fn predict_text(&self, raw_text: &str) -> Result<Prediction, BundleError> {
        let row = self.featurize(raw_text);
        let scores = self.model.scores(&row)?;
        let label = self.model.predict(&row)?;
        Ok(Prediction { label, scores: self.model.classes().iter().copied().zip(scores).collect() })
    }

    pub fn to_json(&self) -> String {
        let file = BundleFileRef {
            schema_version: BUNDLE_SCHEMA_VERSION,
            pipeline: self.pipeline.config(),
            lexicon: self.pipeline.lexicon(),
            weighting: self.weighting,
            vocabulary: &self.vocabulary,
            model: &self.model,
        };
        serde_json::to_string(&file).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| BundleError::Corrupt(e.to_string()))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(BUNDLE_SCHEMA_VERSION) => {}
            Some(found) => return Err(BundleError::SchemaVersionMismatch { found, expected: BUNDLE_SCHEMA_VERSION }),
            None => return Err(BundleError::BundleIncomplete("schema_version")),
        }
        let file: BundleFile = serde_json::from_value(value).map_err(|e| BundleError::Corrupt(e.to_string()))?;
        let pipeline = file.pipeline.ok_or(BundleError::BundleIncomplete("pipeline"))?;
        let lexicon = file.lexicon.ok_or(BundleError::BundleIncomplete("lexicon"))?;
        let weighting = file.weighting.ok_or(BundleError::BundleIncomplete("weighting"))?;
        let vocabulary: Vocabulary =
            serde_json::from_value(file.vocabulary.ok_or(BundleError::BundleIncomplete("vocabulary"))?)
                .map_err(|e| BundleError::Corrupt(format!("vocabulary: {e}")))?;
        let mut model = file.model.ok_or(BundleError::BundleIncomplete("model"))?;
        if let Some(obj) = model.as_object_mut() {
            obj.insert("schema_version".into(), classifiers::MODEL_SCHEMA_VERSION.into());
        }
        let model = TrainedModel::from_json(&model.to_string())?;
        if model.n_features() != vocabulary.len() {
            return Err(BundleError::Corrupt(format!(
                "model expects {} features, vocabulary has {}",
                model.n_features(),
                vocabulary.len()
            )));
        }
        let pipeline = Pipeline::with_lexicon(pipeline, lexicon)?;
        Ok(ModelBundle { pipeline, vocabulary, weighting, model })
    }

    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        fs::write(path, self.to_json()).map_err(|source| BundleError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let text = fs::read_to_string(path).map_err(|source| BundleError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}
