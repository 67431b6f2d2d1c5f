//! Detection models: linear SVM over TF-IDF text features and a logistic
//! fusion head over text embeddings concatenated with audio features, plus
//! the stratified cross-validation harness that evaluates them.

mod cv;
pub mod fusion;
pub mod metrics;
pub mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::clean_text;
use crate::error::{Error, Result};
use crate::textstats::{tfidf_transform, SparseVector, TfidfVocabulary};

pub use cv::{evaluate_cv, evaluate_model, CvReport, FoldOutcome, ModelSpec};
pub use fusion::{
    logistic_loss_and_gradient, train_fusion, FusionOptions, FusionTrained, NormStats,
};
pub use metrics::{BinaryCounts, FoldMetrics, MetricsReport};
pub use svm::{svm_primal_objective, train_svm, SvmOptions, SvmTrained};

const MODEL_FORMAT_VERSION: u32 = 1;

/// Which feature pipeline a trained model expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    Tfidf,
    Fusion,
}

/// A serialized linear classifier: weights and bias plus the fitted feature
/// pipeline (TF-IDF vocabulary, or audio normalization statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub version: u32,
    pub feature_space: FeatureSpace,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_stats: Option<NormStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<TfidfVocabulary>,
}

impl LinearModel {
    pub fn from_svm(trained: SvmTrained, vocabulary: TfidfVocabulary) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            feature_space: FeatureSpace::Tfidf,
            weights: trained.weights,
            bias: trained.bias,
            norm_stats: None,
            vocabulary: Some(vocabulary),
        }
    }

    pub fn from_fusion(trained: FusionTrained) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            feature_space: FeatureSpace::Fusion,
            weights: trained.weights,
            bias: trained.bias,
            norm_stats: Some(trained.norm_stats),
            vocabulary: None,
        }
    }

    /// Classify raw post text with a TF-IDF model.
    pub fn predict_text(&self, text: &str) -> Result<u8> {
        let vocabulary = self
            .vocabulary
            .as_ref()
            .ok_or_else(|| Error::Model("model has no TF-IDF vocabulary".into()))?;
        let x = featurize_text(text, vocabulary);
        Ok(u8::from(x.dot_dense(&self.weights) + self.bias > 0.0))
    }

    /// Classify an (embedding, audio feature row) pair with a fusion model.
    pub fn predict_fused(&self, embedding: &[f64], audio_row: &[f64]) -> Result<u8> {
        let norm = self
            .norm_stats
            .as_ref()
            .ok_or_else(|| Error::Model("model has no normalization statistics".into()))?;
        if embedding.len() + audio_row.len() != self.weights.len() {
            return Err(Error::Model(format!(
                "feature dimension {} does not match model dimension {}",
                embedding.len() + audio_row.len(),
                self.weights.len()
            )));
        }
        let mut row = embedding.to_vec();
        row.extend(norm.apply(audio_row));
        let score: f64 = row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias;
        Ok(u8::from(score > 0.0))
    }

    /// Write the model as a versioned JSON blob.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut model: Self = serde_json::from_reader(file)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", model.version)));
        }
        if let Some(vocabulary) = &mut model.vocabulary {
            vocabulary.reindex();
        }
        Ok(model)
    }
}

/// Text featurization used consistently at train and inference time:
/// hashtag/mention cleanup, then TF-IDF.
pub fn featurize_text(text: &str, vocabulary: &TfidfVocabulary) -> SparseVector {
    tfidf_transform(&clean_text(text), vocabulary)
}
