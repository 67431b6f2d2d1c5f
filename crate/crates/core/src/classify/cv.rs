//! Stratified cross-validation. Feature pipelines (TF-IDF vocabulary,
//! audio normalization) are fitted inside each training fold only.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::audiofeat::AudioFeatureVector;
use crate::corpus::{stratified_folds, Corpus, Post};
use crate::error::{Error, Result};
use crate::textstats::tfidf_fit;

use super::fusion::{train_fusion, FusionOptions};
use super::metrics::{BinaryCounts, FoldMetrics, MetricsReport};
use super::svm::{train_svm, SvmOptions};
use super::{featurize_text, LinearModel};

/// Which model to train in each fold.
#[derive(Debug, Clone, Copy)]
pub enum ModelSpec {
    Svm(SvmOptions),
    Fusion(FusionOptions),
}

/// One trained fold with its held-out metrics.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub metrics: FoldMetrics,
    pub model: LinearModel,
    pub test_indices: Vec<usize>,
}

/// Cross-validation result: aggregate metrics plus every fold's model, kept
/// for auditing (for example leakage checks on fold vocabularies).
#[derive(Debug, Clone)]
pub struct CvReport {
    pub metrics: MetricsReport,
    pub folds: Vec<FoldOutcome>,
}

fn label_of(post: &Post) -> Result<u8> {
    post.label.ok_or_else(|| Error::MissingField { id: post.id.clone(), what: "label".into() })
}

fn embedding_of(post: &Post) -> Result<&Vec<f64>> {
    post.embedding
        .as_ref()
        .ok_or_else(|| Error::MissingField { id: post.id.clone(), what: "embedding".into() })
}

fn audio_row_of<'a>(
    post: &Post,
    audio: &'a BTreeMap<String, AudioFeatureVector>,
) -> Result<&'a AudioFeatureVector> {
    audio
        .get(&post.id)
        .ok_or_else(|| Error::MissingField { id: post.id.clone(), what: "audio features".into() })
}

fn run_fold(
    corpus: &Corpus,
    spec: &ModelSpec,
    audio: Option<&BTreeMap<String, AudioFeatureVector>>,
    fold: usize,
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<FoldOutcome> {
    let posts = corpus.posts();
    let truth: Vec<u8> = test.iter().map(|&i| label_of(&posts[i])).collect::<Result<_>>()?;

    let (model, predicted) = match spec {
        ModelSpec::Svm(options) => {
            let train_texts: Vec<String> = train
                .iter()
                .map(|&i| crate::corpus::clean_text(&posts[i].text))
                .collect();
            let vocabulary = tfidf_fit(&train_texts)?;
            let x: Vec<_> = train.iter().map(|&i| featurize_text(&posts[i].text, &vocabulary)).collect();
            let y: Vec<u8> = train.iter().map(|&i| label_of(&posts[i])).collect::<Result<_>>()?;
            let options = SvmOptions { seed: seed ^ fold as u64, ..*options };
            let trained = train_svm(&x, &y, &options)?;
            let model = LinearModel::from_svm(trained, vocabulary);
            let predicted: Vec<u8> = test
                .iter()
                .map(|&i| model.predict_text(&posts[i].text))
                .collect::<Result<_>>()?;
            (model, predicted)
        }
        ModelSpec::Fusion(options) => {
            let audio = audio
                .ok_or_else(|| Error::Model("fusion evaluation needs an audio feature table".into()))?;
            let gather = |ids: &[usize]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<u8>)> {
                let mut embeddings = Vec::with_capacity(ids.len());
                let mut rows = Vec::with_capacity(ids.len());
                let mut labels = Vec::with_capacity(ids.len());
                for &i in ids {
                    let post = &posts[i];
                    embeddings.push(embedding_of(post)?.clone());
                    rows.push(audio_row_of(post, audio)?.ordered_values());
                    labels.push(label_of(post)?);
                }
                Ok((embeddings, rows, labels))
            };
            let (train_e, train_a, train_y) = gather(train)?;
            let trained = train_fusion(&train_e, &train_a, &train_y, options)?;
            let model = LinearModel::from_fusion(trained);
            let (test_e, test_a, _) = gather(test)?;
            let predicted: Vec<u8> = test_e
                .iter()
                .zip(&test_a)
                .map(|(e, a)| model.predict_fused(e, a))
                .collect::<Result<_>>()?;
            (model, predicted)
        }
    };

    let metrics = BinaryCounts::tally(&truth, &predicted).fold_metrics();
    Ok(FoldOutcome { fold, metrics, model, test_indices: test.to_vec() })
}

/// Run k-fold stratified cross-validation; folds train in parallel. The
/// positive class for precision/recall/F1 is label 1.
pub fn evaluate_cv(
    corpus: &Corpus,
    spec: &ModelSpec,
    audio: Option<&BTreeMap<String, AudioFeatureVector>>,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let folds = stratified_folds(corpus, k, seed)?;
    let outcomes: Vec<FoldOutcome> = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| run_fold(corpus, spec, audio, i, &fold.train, &fold.test, seed))
        .collect::<Result<_>>()?;
    let per_fold: Vec<FoldMetrics> = outcomes.iter().map(|o| o.metrics).collect();
    Ok(CvReport { metrics: MetricsReport::from_folds(&per_fold), folds: outcomes })
}

/// Evaluate a trained model on every labeled post of a corpus.
pub fn evaluate_model(
    corpus: &Corpus,
    model: &LinearModel,
    audio: Option<&BTreeMap<String, AudioFeatureVector>>,
) -> Result<FoldMetrics> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for post in corpus.posts() {
        truth.push(label_of(post)?);
        let prediction = match model.feature_space {
            super::FeatureSpace::Tfidf => model.predict_text(&post.text)?,
            super::FeatureSpace::Fusion => {
                let audio = audio.ok_or_else(|| {
                    Error::Model("fusion evaluation needs an audio feature table".into())
                })?;
                model.predict_fused(embedding_of(post)?, &audio_row_of(post, audio)?.ordered_values())?
            }
        };
        predicted.push(prediction);
    }
    Ok(BinaryCounts::tally(&truth, &predicted).fold_metrics())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Platform;

    /// Labeled corpus where the word "bulo" marks the positive class.
    pub(crate) fn separable_text_corpus(n_per_class: usize) -> Corpus {
        let mut posts = Vec::new();
        for i in 0..n_per_class {
            posts.push(Post {
                id: format!("t{i}"),
                platform: Platform::X,
                text: format!("informe oficial fuentes confirmadas dato {i}"),
                label: Some(0),
                emotions: None,
                lexicon_scores: None,
                audio_path: None,
                embedding: None,
            });
            posts.push(Post {
                id: format!("d{i}"),
                platform: Platform::X,
                text: format!("bulo oculto conspiracion secreta rumor {i}"),
                label: Some(1),
                emotions: None,
                lexicon_scores: None,
                audio_path: None,
                embedding: None,
            });
        }
        Corpus::new(posts).unwrap()
    }

    #[test]
    fn separable_corpus_scores_perfectly() {
        let corpus = separable_text_corpus(20);
        let report = evaluate_cv(&corpus, &ModelSpec::Svm(SvmOptions::default()), None, 5, 7).unwrap();
        assert_eq!(report.metrics.accuracy.0, 1.0);
        assert_eq!(report.metrics.accuracy.1, 0.0);
        assert_eq!(report.metrics.f1.0, 1.0);
        assert_eq!(report.folds.len(), 5);
    }

    #[test]
    fn fold_vocabularies_never_contain_test_only_tokens() {
        // Give every post one unique token; for each fold, tokens of test
        // posts must be absent from that fold's fitted vocabulary.
        let base = separable_text_corpus(10);
        let posts: Vec<Post> = base
            .posts()
            .iter()
            .enumerate()
            .map(|(i, p)| Post { text: format!("{} unicoleak{i}", p.text), ..p.clone() })
            .collect();
        let corpus = Corpus::new(posts).unwrap();
        let report = evaluate_cv(&corpus, &ModelSpec::Svm(SvmOptions::default()), None, 5, 3).unwrap();
        for outcome in &report.folds {
            let vocabulary = outcome.model.vocabulary.as_ref().unwrap();
            for &i in &outcome.test_indices {
                let leak_token = format!("unicoleak{i}");
                assert!(
                    !vocabulary.contains(&leak_token),
                    "fold {} leaked {leak_token}",
                    outcome.fold
                );
            }
        }
    }

    #[test]
    fn cv_is_deterministic_for_seed() {
        let corpus = separable_text_corpus(10);
        let spec = ModelSpec::Svm(SvmOptions::default());
        let a = evaluate_cv(&corpus, &spec, None, 5, 11).unwrap();
        let b = evaluate_cv(&corpus, &spec, None, 5, 11).unwrap();
        assert_eq!(a.metrics, b.metrics);
        for (x, y) in a.folds.iter().zip(&b.folds) {
            assert_eq!(x.model.weights, y.model.weights);
        }
    }

    #[test]
    fn fusion_cv_runs_on_embedding_and_audio() {
        use crate::audiofeat::{extract_features, AudioClip, SAMPLE_RATE};
        // Two acoustic classes: quiet sine vs loud noise; embeddings noise.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut posts = Vec::new();
        let mut audio = BTreeMap::new();
        for i in 0..20 {
            let label = (i % 2) as u8;
            let id = format!("p{i}");
            let samples: Vec<f64> = if label == 0 {
                (0..11025)
                    .map(|n| 0.4 * (2.0 * std::f64::consts::PI * 300.0 * n as f64 / 22050.0).sin())
                    .collect()
            } else {
                (0..11025).map(|_| 0.8 * rng.gen_range(-1.0..1.0)).collect()
            };
            let clip = AudioClip::new(samples, SAMPLE_RATE).unwrap();
            audio.insert(id.clone(), extract_features(&clip).unwrap());
            posts.push(Post {
                id,
                platform: Platform::Tiktok,
                text: String::new(),
                label: Some(label),
                emotions: None,
                lexicon_scores: None,
                audio_path: None,
                embedding: Some((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            });
        }
        let corpus = Corpus::new(posts).unwrap();
        let report = evaluate_cv(
            &corpus,
            &ModelSpec::Fusion(FusionOptions::default()),
            Some(&audio),
            5,
            1,
        )
        .unwrap();
        // Flatness separates the classes perfectly.
        assert!(report.metrics.accuracy.0 > 0.9, "accuracy {:?}", report.metrics.accuracy);
    }

    #[test]
    fn fusion_without_embedding_names_the_post() {
        let corpus = separable_text_corpus(5);
        let err = evaluate_cv(
            &corpus,
            &ModelSpec::Fusion(FusionOptions::default()),
            Some(&BTreeMap::new()),
            5,
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
