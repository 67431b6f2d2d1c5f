//! Post dataset: loading, validation, text cleaning, keyword filtering and
//! stratified partitioning.
//!
//! The on-disk format is JSON lines, one object per post. TikTok post text is
//! the video transcript concatenated with any on-screen OCR text; joining the
//! two is done upstream at ingestion time.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source platform of a post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    X,
    Tiktok,
}

impl std::fmt::Display for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Platform::X => write!(f, "x"),
            Platform::Tiktok => write!(f, "tiktok"),
        }
    }
}

/// One social-media item with its optional per-modality payloads.
///
/// `label` is 0 (trustworthy) or 1 (disinformation) when present. Emotion
/// scores are probabilities in `[0, 1]`; lexicon scores are percentages of
/// words. Embeddings must share one dimension across a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub platform: Platform,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotions: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon_scores: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Post {
    fn validate(&self, line: usize) -> Result<()> {
        let bad = |message: String| Error::MalformedRecord { line, message };
        if self.id.is_empty() {
            return Err(bad("empty post id".into()));
        }
        if let Some(label) = self.label {
            if label > 1 {
                return Err(bad(format!("post {}: label must be 0 or 1, got {label}", self.id)));
            }
        }
        if let Some(emotions) = &self.emotions {
            for (name, score) in emotions {
                if !score.is_finite() || !(0.0..=1.0).contains(score) {
                    return Err(bad(format!(
                        "post {}: emotion {name} score {score} outside [0, 1]",
                        self.id
                    )));
                }
            }
        }
        if let Some(scores) = &self.lexicon_scores {
            for (name, score) in scores {
                if !score.is_finite() {
                    return Err(bad(format!("post {}: lexicon score {name} is not finite", self.id)));
                }
            }
        }
        if let Some(embedding) = &self.embedding {
            if embedding.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("post {}: embedding has non-finite values", self.id)));
            }
        }
        Ok(())
    }
}

/// An immutable, validated collection of posts.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    posts: Vec<Post>,
    embedding_dim: Option<usize>,
}

impl Corpus {
    /// Build a corpus from posts, checking id uniqueness and embedding
    /// dimension consistency.
    pub fn new(posts: Vec<Post>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut embedding_dim = None;
        for (i, post) in posts.iter().enumerate() {
            post.validate(i + 1)?;
            if !seen.insert(post.id.clone()) {
                return Err(Error::DuplicateId(post.id.clone()));
            }
            if let Some(embedding) = &post.embedding {
                match embedding_dim {
                    None => embedding_dim = Some(embedding.len()),
                    Some(expected) if expected != embedding.len() => {
                        return Err(Error::EmbeddingDim {
                            id: post.id.clone(),
                            got: embedding.len(),
                            expected,
                        });
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { posts, embedding_dim })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    /// Number of posts on `platform`.
    pub fn count_by_platform(&self, platform: Platform) -> usize {
        self.posts.iter().filter(|p| p.platform == platform).count()
    }

    /// Number of posts with `label`.
    pub fn count_by_label(&self, label: u8) -> usize {
        self.posts.iter().filter(|p| p.label == Some(label)).count()
    }

    /// Per-platform, per-label counts: (platform, label 0, label 1, unlabeled).
    pub fn label_distribution(&self) -> Vec<(Platform, usize, usize, usize)> {
        [Platform::Tiktok, Platform::X]
            .into_iter()
            .map(|platform| {
                let of = |label| {
                    self.posts
                        .iter()
                        .filter(|p| p.platform == platform && p.label == Some(label))
                        .count()
                };
                let unlabeled = self
                    .posts
                    .iter()
                    .filter(|p| p.platform == platform && p.label.is_none())
                    .count();
                (platform, of(0), of(1), unlabeled)
            })
            .collect()
    }

    /// Serialize to JSON lines, one post per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for post in &self.posts {
            serde_json::to_writer(&mut file, post)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Load a JSON-lines corpus. Blank lines are rejected as malformed; every
/// error names the offending 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let post: Post = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        post.validate(i + 1)?;
        posts.push(post);
    }
    Corpus::new(posts)
}

/// Remove hashtag and mention tokens and normalize whitespace.
///
/// A token is a whitespace-delimited run; tokens starting with `#` or `@`
/// are deleted entirely. The result is single-spaced and trimmed.
pub fn clean_text(text: &str) -> String {
    text.split_whitespace()
        .filter(|token| !token.starts_with('#') && !token.starts_with('@'))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Case-insensitive, accent-sensitive substring search for each keyword.
/// Returns the matched keywords in list order.
pub fn match_keywords<'a>(text: &str, keywords: &'a [String]) -> Vec<&'a str> {
    let haystack = text.to_lowercase();
    keywords
        .iter()
        .filter(|kw| !kw.is_empty() && haystack.contains(&kw.to_lowercase()))
        .map(|kw| kw.as_str())
        .collect()
}

/// One cross-validation fold as (train, test) index sets into the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold partition of a fully labeled corpus.
///
/// Each class is shuffled with a PRNG seeded from `seed` and dealt round-robin
/// into test folds; the folds carrying a class's remainder rotate across
/// classes so overall fold sizes also differ by at most one. Test sets
/// partition the corpus and the split is deterministic for a given seed.
pub fn stratified_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, post) in corpus.posts.iter().enumerate() {
        let label = post.label.ok_or_else(|| Error::MissingField {
            id: post.id.clone(),
            what: "label".into(),
        })?;
        by_class.entry(label).or_default().push(i);
    }
    for (label, members) in &by_class {
        if members.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {label} has {} members, fewer than k = {k}",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_extra_fold = 0usize;
    for members in by_class.values() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        let base = members.len() / k;
        let extras = members.len() % k;
        let mut cursor = 0;
        for offset in 0..k {
            let fold = (next_extra_fold + offset) % k;
            let take = base + usize::from(offset < extras);
            test_sets[fold].extend(&members[cursor..cursor + take]);
            cursor += take;
        }
        next_extra_fold = (next_extra_fold + extras) % k;
    }

    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let in_test: HashSet<usize> = test.iter().copied().collect();
            let train = (0..corpus.len()).filter(|i| !in_test.contains(i)).collect();
            Fold { train, test }
        })
        .collect();
    Ok(folds)
}
