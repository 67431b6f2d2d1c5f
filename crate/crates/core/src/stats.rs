//! Nonparametric group comparison (Mann–Whitney U) and annotation agreement
//! (Cohen's kappa).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{Corpus, Post};
use crate::error::{Error, Result};

/// Mann–Whitney U outcome for two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwResult {
    /// U statistic of the first group.
    pub u: f64,
    /// Two-sided p-value from the normal approximation.
    pub p_two_sided: f64,
    pub n0: usize,
    pub n1: usize,
}

/// Midranks of the pooled sample: tied values share the average of the ranks
/// they occupy. Returns (ranks per element, tie group sizes).
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a run [i, j) gets the average (i+1 + j) / 2.
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sample Mann–Whitney U test with midranks, tie-corrected variance and
/// continuity correction 0.5; two-sided p from the normal approximation.
/// When every pooled value is identical the tie-corrected variance vanishes
/// and p is defined as 1.
pub fn mann_whitney_u(group0: &[f64], group1: &[f64]) -> Result<MwResult> {
    if group0.is_empty() || group1.is_empty() {
        return Err(Error::InvalidInput("mann_whitney_u requires two non-empty groups".into()));
    }
    if group0.iter().chain(group1).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("mann_whitney_u requires finite values".into()));
    }
    let n0 = group0.len();
    let n1 = group1.len();
    let mut pooled = Vec::with_capacity(n0 + n1);
    pooled.extend_from_slice(group0);
    pooled.extend_from_slice(group1);
    let (ranks, ties) = midranks(&pooled);

    let rank_sum0: f64 = ranks[..n0].iter().sum();
    let u = rank_sum0 - (n0 * (n0 + 1)) as f64 / 2.0;

    let n = (n0 + n1) as f64;
    let mean = (n0 * n1) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = (n0 * n1) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));

    let p_two_sided = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
    };

    Ok(MwResult { u, p_two_sided, n0, n1 })
}

/// Per-feature comparison between the label-0 and label-1 groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub feature: String,
    pub mean0: f64,
    pub std0: f64,
    pub mean1: f64,
    pub std1: f64,
    pub p: f64,
    pub significant: bool,
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Compare every named feature between label groups 0 and 1. `extract` pulls
/// the feature value off a post; a `None` for any selected post is an error
/// naming that post. Rows are ordered by ascending p-value (feature name
/// breaks ties) and flagged significant when `p < alpha`.
pub fn compare_groups<F>(
    corpus: &Corpus,
    features: &[String],
    extract: F,
    alpha: f64,
) -> Result<Vec<ComparisonRow>>
where
    F: Fn(&Post, &str) -> Option<f64>,
{
    let mut rows = Vec::with_capacity(features.len());
    for feature in features {
        let mut group0 = Vec::new();
        let mut group1 = Vec::new();
        for post in corpus.posts() {
            let label = post.label.ok_or_else(|| Error::MissingField {
                id: post.id.clone(),
                what: "label".into(),
            })?;
            let value = extract(post, feature).ok_or_else(|| Error::MissingField {
                id: post.id.clone(),
                what: format!("feature {feature}"),
            })?;
            if label == 0 {
                group0.push(value);
            } else {
                group1.push(value);
            }
        }
        let mw = mann_whitney_u(&group0, &group1)?;
        let (mean0, std0) = mean_and_population_std(&group0);
        let (mean1, std1) = mean_and_population_std(&group1);
        rows.push(ComparisonRow {
            feature: feature.clone(),
            mean0,
            std0,
            mean1,
            std1,
            p: mw.p_two_sided,
            significant: mw.p_two_sided < alpha,
        });
    }
    rows.sort_by(|a, b| a.p.total_cmp(&b.p).then_with(|| a.feature.cmp(&b.feature)));
    Ok(rows)
}

/// Square agreement matrix over ordered categories. Rows index the first
/// labeling, columns the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != labels.len() || counts.iter().any(|row| row.len() != labels.len()) {
            return Err(Error::InvalidInput("confusion matrix must be square over its labels".into()));
        }
        let m = Self { labels, counts };
        if m.total() == 0 {
            return Err(Error::InvalidInput("confusion matrix must have a positive total".into()));
        }
        Ok(m)
    }

    /// Tally paired labelings into a matrix over the given category order.
    pub fn from_pairs(labels: Vec<String>, pairs: &[(usize, usize)]) -> Result<Self> {
        let k = labels.len();
        let mut counts = vec![vec![0u64; k]; k];
        for &(a, b) in pairs {
            if a >= k || b >= k {
                return Err(Error::InvalidInput(format!("pair ({a}, {b}) outside {k} categories")));
            }
            counts[a][b] += 1;
        }
        Self::new(labels, counts)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let k = self.labels.len();
        (0..k).map(|j| self.counts.iter().map(|row| row[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let k = self.labels.len();
        let counts = (0..k)
            .map(|i| (0..k).map(|j| self.counts[j][i]).collect())
            .collect();
        Self { labels: self.labels.clone(), counts }
    }

    /// Parse a CSV matrix: header row of category names (an optional leading
    /// empty cell is allowed), then one row per category with its name first.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = records
            .next()
            .ok_or_else(|| Error::InvalidInput("empty matrix file".into()))??;
        let mut labels: Vec<String> = header.iter().map(str::to_string).collect();
        if labels.first().map(String::as_str) == Some("") {
            labels.remove(0);
        }
        let mut counts = Vec::new();
        for record in records {
            let record = record?;
            let fields: Vec<&str> = record.iter().collect();
            if fields.is_empty() || fields.iter().all(|f| f.is_empty()) {
                continue;
            }
            let row: Vec<u64> = fields[1..]
                .iter()
                .map(|f| f.parse::<u64>().map_err(|_| Error::InvalidInput(format!("bad count {f:?}"))))
                .collect::<Result<_>>()?;
            counts.push(row);
        }
        Self::new(labels, counts)
    }
}

/// Chance-corrected agreement `κ = (p_o − p_e) / (1 − p_e)` with
/// `p_o = trace / total` and `p_e = Σ row_i · col_i / total²`. When chance
/// agreement is total (`p_e = 1`), κ is 1 for perfect observed agreement and
/// undefined otherwise.
pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<f64> {
    let total = m.total() as f64;
    let trace: u64 = (0..m.labels.len()).map(|i| m.counts[i][i]).sum();
    let observed = trace as f64 / total;
    let expected = m
        .row_sums()
        .iter()
        .zip(m.col_sums())
        .map(|(&r, c)| r as f64 * c as f64)
        .sum::<f64>()
        / (total * total);
    if (1.0 - expected).abs() < 1e-15 {
        return if (1.0 - observed).abs() < 1e-15 {
            Ok(1.0)
        } else {
            Err(Error::InvalidInput("chance agreement is 1 but observed agreement is not".into()))
        };
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Merge matrix categories under `mapping` (old label → new label). Every
/// label of `m` must be mapped; counts are summed into the mapped cells, so
/// the grand total is preserved. New labels appear in first-mapped order.
pub fn collapse_matrix<F>(m: &ConfusionMatrix, mapping: F) -> Result<ConfusionMatrix>
where
    F: Fn(&str) -> Option<String>,
{
    let mut new_labels: Vec<String> = Vec::new();
    let mut target_of = Vec::with_capacity(m.labels.len());
    for label in &m.labels {
        let mapped = mapping(label)
            .ok_or_else(|| Error::InvalidInput(format!("category {label:?} is not mapped")))?;
        let idx = match new_labels.iter().position(|l| l == &mapped) {
            Some(idx) => idx,
            None => {
                new_labels.push(mapped);
                new_labels.len() - 1
            }
        };
        target_of.push(idx);
    }
    let k = new_labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            counts[target_of[i]][target_of[j]] += c;
        }
    }
    ConfusionMatrix::new(new_labels, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Platform;
    use approx::assert_abs_diff_eq;

    pub(crate) fn four_category_matrix() -> ConfusionMatrix {
        ConfusionMatrix::new(
            vec!["0".into(), "1".into(), "2".into(), "3".into()],
            vec![
                vec![15, 1, 0, 2],
                vec![1, 13, 1, 1],
                vec![3, 4, 28, 5],
                vec![4, 2, 3, 36],
            ],
        )
        .unwrap()
    }

    #[test]
    fn mwu_separated_groups() {
        let result = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(result.u, 0.0);
        // z = (|0 - 4.5| - 0.5) / sqrt(5.25); two-sided normal tail.
        assert_abs_diff_eq!(result.p_two_sided, 0.0809, epsilon = 1e-3);
    }

    #[test]
    fn mwu_all_ties_gives_p_one() {
        let result = mann_whitney_u(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(result.u, 4.5);
        assert_eq!(result.p_two_sided, 1.0);
    }

    #[test]
    fn mwu_u_statistics_sum_to_product() {
        let g0 = [0.3, 1.5, 1.5, 2.0, 9.0];
        let g1 = [0.1, 1.5, 3.0, 4.0];
        let forward = mann_whitney_u(&g0, &g1).unwrap();
        let backward = mann_whitney_u(&g1, &g0).unwrap();
        assert_abs_diff_eq!(forward.u + backward.u, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(forward.p_two_sided, backward.p_two_sided, epsilon = 1e-12);
    }

    #[test]
    fn mwu_rejects_bad_input() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(mann_whitney_u(&[1.0], &[f64::NAN]).is_err());
    }

    fn emo_post(id: &str, label: u8, sadness: f64) -> Post {
        Post {
            id: id.into(),
            platform: Platform::X,
            text: String::new(),
            label: Some(label),
            emotions: Some([("sadness".to_string(), sadness)].into_iter().collect()),
            lexicon_scores: None,
            audio_path: None,
            embedding: None,
        }
    }

    #[test]
    fn compare_groups_constant_feature_not_significant() {
        let corpus = Corpus::new(vec![
            emo_post("a", 0, 0.5),
            emo_post("b", 0, 0.5),
            emo_post("c", 1, 0.5),
            emo_post("d", 1, 0.5),
        ])
        .unwrap();
        let rows = compare_groups(
            &corpus,
            &["sadness".to_string()],
            |post, name| post.emotions.as_ref().and_then(|e| e.get(name).copied()),
            0.05,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].p, 1.0);
        assert!(!rows[0].significant);
        assert_eq!(rows[0].mean0, 0.5);
        assert_eq!(rows[0].std0, 0.0);
    }

    #[test]
    fn compare_groups_names_post_missing_feature() {
        let mut bad = emo_post("holes", 1, 0.1);
        bad.emotions = None;
        let corpus = Corpus::new(vec![emo_post("a", 0, 0.5), bad]).unwrap();
        let err = compare_groups(
            &corpus,
            &["sadness".to_string()],
            |post, name| post.emotions.as_ref().and_then(|e| e.get(name).copied()),
            0.05,
        )
        .unwrap_err();
        assert!(err.to_string().contains("holes"), "{err}");
    }

    #[test]
    fn compare_groups_separated_fixture_is_significant() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut posts = Vec::new();
        for i in 0..100 {
            posts.push(emo_post(&format!("a{i}"), 0, (0.3 + 0.05 * rng.gen::<f64>()).min(1.0)));
            posts.push(emo_post(&format!("b{i}"), 1, (0.6 + 0.05 * rng.gen::<f64>()).min(1.0)));
        }
        let corpus = Corpus::new(posts).unwrap();
        let rows = compare_groups(
            &corpus,
            &["sadness".to_string()],
            |post, name| post.emotions.as_ref().and_then(|e| e.get(name).copied()),
            0.001,
        )
        .unwrap();
        assert!(rows[0].p < 0.001);
        assert!(rows[0].significant);
    }

    #[test]
    fn kappa_four_and_two_category_agreement() {
        let four = four_category_matrix();
        assert_abs_diff_eq!(cohen_kappa(&four).unwrap(), 0.684, epsilon = 1e-3);

        let two = ConfusionMatrix::new(
            vec!["0".into(), "1".into()],
            vec![vec![66, 8], vec![9, 36]],
        )
        .unwrap();
        assert_abs_diff_eq!(cohen_kappa(&two).unwrap(), 0.695, epsilon = 1e-3);
    }

    #[test]
    fn kappa_perfect_agreement_is_one() {
        let m = ConfusionMatrix::new(
            vec!["0".into(), "1".into()],
            vec![vec![7, 0], vec![0, 5]],
        )
        .unwrap();
        assert_abs_diff_eq!(cohen_kappa(&m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_equals_kappa_of_transpose() {
        let m = four_category_matrix();
        assert_abs_diff_eq!(
            cohen_kappa(&m).unwrap(),
            cohen_kappa(&m.transpose()).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn matrix_rejects_degenerate_shapes() {
        assert!(ConfusionMatrix::new(vec!["a".into()], vec![vec![1, 2]]).is_err());
        assert!(ConfusionMatrix::new(vec!["a".into()], vec![vec![0]]).is_err());
    }

    #[test]
    fn collapse_merges_first_three_categories() {
        let four = four_category_matrix();
        let collapsed = collapse_matrix(&four, |label| {
            Some(if label == "3" { "1".to_string() } else { "0".to_string() })
        })
        .unwrap();
        assert_eq!(collapsed.counts, vec![vec![66, 8], vec![9, 36]]);
        assert_eq!(collapsed.total(), four.total());
    }

    #[test]
    fn collapse_identity_and_all_to_one() {
        let four = four_category_matrix();
        let same = collapse_matrix(&four, |label| Some(label.to_string())).unwrap();
        assert_eq!(same, four);
        let one = collapse_matrix(&four, |_| Some("all".to_string())).unwrap();
        assert_eq!(one.counts, vec![vec![four.total()]]);
    }

    #[test]
    fn collapse_rejects_unmapped_category() {
        let four = four_category_matrix();
        let err = collapse_matrix(&four, |label| (label != "2").then(|| label.to_string()));
        assert!(err.is_err());
    }

    #[test]
    fn matrix_csv_parses_with_and_without_corner() {
        let with_corner = ",0,1\n0,66,8\n1,9,36\n";
        let without = "0,1\n0,66,8\n1,9,36\n";
        for text in [with_corner, without] {
            let m = ConfusionMatrix::from_csv(text).unwrap();
            assert_eq!(m.labels, vec!["0", "1"]);
            assert_eq!(m.counts, vec![vec![66, 8], vec![9, 36]]);
        }
    }
}
