//! Text statistics: tokenization, vocabulary weirdness against a reference
//! corpus, lexicon-category profiling and TF-IDF vectorization.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase tokens split on non-alphanumeric boundaries. Accented letters
/// count as letters; digits embedded in words are kept; no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token frequency table over one corpus side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl TokenCounts {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for text in texts {
            for token in tokenize(text) {
                *counts.entry(token).or_insert(0) += 1;
                total += 1;
            }
        }
        Self { counts, total }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }
}

/// Per-word weirdness values with summary statistics over the target
/// vocabulary.
#[derive(Debug, Clone)]
pub struct WiReport {
    pub per_word: BTreeMap<String, f64>,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub frac_above_2: f64,
}

/// Ratio of a word's smoothed relative frequency in the target corpus to its
/// smoothed relative frequency in the reference corpus:
///
/// `WI(w) = ((c_t(w) + 1) / (N_t + V)) / ((c_r(w) + 1) / (N_r + V))`
///
/// with add-one smoothing and `V` the size of the union vocabulary, so words
/// absent from the reference stay finite. Summary statistics cover the target
/// vocabulary only.
pub fn weirdness_index(target: &TokenCounts, reference: &TokenCounts) -> Result<WiReport> {
    if target.total == 0 || target.counts.is_empty() {
        return Err(Error::InvalidInput("target corpus has no tokens".into()));
    }
    if reference.total == 0 {
        return Err(Error::InvalidInput("reference corpus has no tokens".into()));
    }
    let union_vocab = target
        .counts
        .keys()
        .chain(reference.counts.keys())
        .collect::<HashSet<_>>()
        .len() as f64;
    let target_denom = target.total as f64 + union_vocab;
    let reference_denom = reference.total as f64 + union_vocab;

    let per_word: BTreeMap<String, f64> = target
        .counts
        .iter()
        .map(|(word, &count)| {
            let target_rate = (count as f64 + 1.0) / target_denom;
            let reference_rate = (reference.count(word) as f64 + 1.0) / reference_denom;
            (word.clone(), target_rate / reference_rate)
        })
        .collect();

    let n = per_word.len() as f64;
    let mean = per_word.values().sum::<f64>() / n;
    let std = (per_word.values().map(|wi| (wi - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted: Vec<f64> = per_word.values().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    let frac_above_2 = per_word.values().filter(|&&wi| wi > 2.0).count() as f64 / n;

    Ok(WiReport { per_word, mean, median, std, frac_above_2 })
}

/// A single lexicon entry: a literal word or a prefix pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexiconEntry {
    Literal(String),
    Prefix(String),
}

impl LexiconEntry {
    fn matches(&self, token: &str) -> bool {
        match self {
            LexiconEntry::Literal(word) => token == word,
            LexiconEntry::Prefix(prefix) => token.starts_with(prefix.as_str()),
        }
    }
}

/// Category lexicon: maps a category name to its word list. Entries ending
/// in `*` match any token with that prefix; everything is lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub categories: BTreeMap<String, Vec<LexiconEntry>>,
}

impl Lexicon {
    /// Parse the `category: word1, word2, prefijo*` text format. Blank lines
    /// and lines starting with `#` are skipped. Entries are lowercased.
    pub fn parse(text: &str) -> Result<Self> {
        let mut categories: BTreeMap<String, Vec<LexiconEntry>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (category, entries) = line.split_once(':').ok_or_else(|| Error::MalformedRecord {
                line: i + 1,
                message: "expected `category: word1, word2`".into(),
            })?;
            let category = category.trim();
            if category.is_empty() {
                return Err(Error::MalformedRecord { line: i + 1, message: "empty category name".into() });
            }
            let bucket = categories.entry(category.to_string()).or_default();
            for entry in entries.split(',') {
                let entry = entry.trim().to_lowercase();
                if entry.is_empty() {
                    return Err(Error::MalformedRecord { line: i + 1, message: "empty lexicon entry".into() });
                }
                bucket.push(match entry.strip_suffix('*') {
                    Some(prefix) if prefix.is_empty() => {
                        return Err(Error::MalformedRecord {
                            line: i + 1,
                            message: "bare `*` is not a valid entry".into(),
                        })
                    }
                    Some(prefix) => LexiconEntry::Prefix(prefix.to_string()),
                    None => LexiconEntry::Literal(entry),
                });
            }
        }
        Ok(Self { categories })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::parse(&text)
    }
}

/// Percent of tokens matched per category. One token may count toward many
/// categories; a zero-token text scores 0 everywhere.
pub fn lexicon_profile(text: &str, lexicon: &Lexicon) -> BTreeMap<String, f64> {
    let tokens = tokenize(text);
    let total = tokens.len() as f64;
    lexicon
        .categories
        .iter()
        .map(|(category, entries)| {
            let percent = if total == 0.0 {
                0.0
            } else {
                let matched = tokens
                    .iter()
                    .filter(|token| entries.iter().any(|e| e.matches(token)))
                    .count() as f64;
                100.0 * matched / total
            };
            (category.clone(), percent)
        })
        .collect()
}

/// A sparse vector in a fixed-dimension feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * dense[i])
            .sum()
    }
}

/// Fitted TF-IDF vocabulary: term table plus inverse document frequencies.
/// Term indices follow sorted term order, so fits are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfVocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.term_index(term).is_some()
    }

    fn term_index(&self, term: &str) -> Option<usize> {
        if self.index.len() == self.terms.len() {
            self.index.get(term).copied()
        } else {
            // Deserialized vocabularies lack the side table; terms are sorted.
            self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
        }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// Fit a TF-IDF vocabulary: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn tfidf_fit<S: AsRef<str>>(documents: &[S]) -> Result<TfidfVocabulary> {
    if documents.is_empty() {
        return Err(Error::InvalidInput("cannot fit TF-IDF on an empty document list".into()));
    }
    let n = documents.len() as f64;
    let mut document_frequency: BTreeMap<String, u64> = BTreeMap::new();
    for doc in documents {
        let unique: HashSet<String> = tokenize(doc.as_ref()).into_iter().collect();
        for token in unique {
            *document_frequency.entry(token).or_insert(0) += 1;
        }
    }
    let terms: Vec<String> = document_frequency.keys().cloned().collect();
    let idf = terms
        .iter()
        .map(|t| ((1.0 + n) / (1.0 + document_frequency[t] as f64)).ln() + 1.0)
        .collect();
    let mut vocab = TfidfVocabulary { terms, idf, index: HashMap::new() };
    vocab.reindex();
    Ok(vocab)
}

/// Transform one document: raw term counts weighted by IDF, L2-normalized.
/// Terms outside the vocabulary are dropped.
pub fn tfidf_transform(text: &str, vocab: &TfidfVocabulary) -> SparseVector {
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokenize(text) {
        if let Some(i) = vocab.term_index(&token) {
            *weights.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut indices = Vec::with_capacity(weights.len());
    let mut values = Vec::with_capacity(weights.len());
    for (i, count) in weights {
        indices.push(i);
        values.push(count * vocab.idf[i]);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    SparseVector { dim: vocab.len(), indices, values }
}
