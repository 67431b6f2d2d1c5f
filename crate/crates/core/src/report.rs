//! Table and plot emission. Column orders and numeric precision follow the
//! layouts of the analysis tables (p-values at six decimals, means and
//! standard deviations at three); plots are self-contained deterministic SVG.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::classify::MetricsReport;
use crate::stats::ComparisonRow;
use crate::textstats::{TokenCounts, WiReport};

/// Output format for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::InvalidInput(format!("unknown table format {other:?}"))),
        }
    }
}

fn write_table(
    header: &[String],
    rows: &[Vec<String>],
    format: TableFormat,
    path: &Path,
) -> Result<()> {
    match format {
        TableFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)?;
            writer.write_record(header)?;
            for row in rows {
                writer.write_record(row)?;
            }
            writer.flush()?;
        }
        TableFormat::Markdown => {
            let mut file = std::fs::File::create(path)?;
            writeln!(file, "| {} |", header.join(" | "))?;
            writeln!(file, "|{}|", header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|"))?;
            for row in rows {
                writeln!(file, "| {} |", row.join(" | "))?;
            }
        }
    }
    Ok(())
}

/// Group comparison table: first column names the feature, then
/// `Mean (0), Std (0), Mean (1), Std (1), p-value`.
pub fn emit_comparison_table(
    rows: &[ComparisonRow],
    label_column: &str,
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no comparison rows to emit".into()));
    }
    let header: Vec<String> = [label_column, "Mean (0)", "Std (0)", "Mean (1)", "Std (1)", "p-value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.feature.clone(),
                format!("{:.3}", r.mean0),
                format!("{:.3}", r.std0),
                format!("{:.3}", r.mean1),
                format!("{:.3}", r.std1),
                format!("{:.6}", r.p),
            ]
        })
        .collect();
    write_table(&header, &body, format, path.as_ref())
}

/// Re-read a comparison CSV produced by [`emit_comparison_table`].
/// Significance flags are reconstructed against `alpha`.
pub fn parse_comparison_csv(path: impl AsRef<Path>, alpha: f64) -> Result<Vec<ComparisonRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad numeric field {i}")))
        };
        let p = field(5)?;
        rows.push(ComparisonRow {
            feature: record.get(0).unwrap_or_default().to_string(),
            mean0: field(1)?,
            std0: field(2)?,
            mean1: field(3)?,
            std1: field(4)?,
            p,
            significant: p < alpha,
        });
    }
    Ok(rows)
}

/// Model metrics table: one row per model, `mean ± std` cells at four
/// decimals.
pub fn emit_metrics_table(
    entries: &[(String, MetricsReport)],
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("no metrics to emit".into()));
    }
    let header: Vec<String> = ["Model", "Accuracy", "F1-Score", "Precision", "Recall"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let cell = |(mean, std): (f64, f64)| format!("{mean:.4} ± {std:.4}");
    let body: Vec<Vec<String>> = entries
        .iter()
        .map(|(name, m)| {
            vec![name.clone(), cell(m.accuracy), cell(m.f1), cell(m.precision), cell(m.recall)]
        })
        .collect();
    write_table(&header, &body, format, path.as_ref())
}

/// Label distribution table: counts per label split by platform, plus the
/// totals row.
pub fn emit_label_distribution(
    corpus: &Corpus,
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let distribution = corpus.label_distribution();
    let by_platform: BTreeMap<String, (usize, usize)> = distribution
        .iter()
        .map(|(platform, zeros, ones, _)| (platform.to_string(), (*zeros, *ones)))
        .collect();
    let (tiktok0, tiktok1) = by_platform.get("tiktok").copied().unwrap_or((0, 0));
    let (x0, x1) = by_platform.get("x").copied().unwrap_or((0, 0));
    let header: Vec<String> =
        ["Label", "TikToks", "Tweets", "Total"].iter().map(|s| s.to_string()).collect();
    let body = vec![
        vec![
            "0 (Trustworthy)".to_string(),
            tiktok0.to_string(),
            x0.to_string(),
            (tiktok0 + x0).to_string(),
        ],
        vec![
            "1 (Disinformation)".to_string(),
            tiktok1.to_string(),
            x1.to_string(),
            (tiktok1 + x1).to_string(),
        ],
        vec![
            "Total".to_string(),
            (tiktok0 + tiktok1).to_string(),
            (x0 + x1).to_string(),
            (tiktok0 + tiktok1 + x0 + x1).to_string(),
        ],
    ];
    write_table(&header, &body, format, path.as_ref())
}

/// Weirdness summary table: one column per dataset, the four summary rows.
pub fn emit_wi_summary(
    entries: &[(String, &WiReport)],
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("no weirdness reports to emit".into()));
    }
    let mut header = vec!["Metric".to_string()];
    header.extend(entries.iter().map(|(name, _)| name.clone()));
    let row = |label: &str, get: &dyn Fn(&WiReport) -> String| {
        let mut cells = vec![label.to_string()];
        cells.extend(entries.iter().map(|(_, r)| get(r)));
        cells
    };
    let body = vec![
        row("WI Global (Mean)", &|r| format!("{:.2}", r.mean)),
        row("WI Global (Median)", &|r| format!("{:.2}", r.median)),
        row("WI Standard Deviation", &|r| format!("{:.2}", r.std)),
        row("Words with WI > 2", &|r| format!("{:.2}%", 100.0 * r.frac_above_2)),
    ];
    write_table(&header, &body, format, path.as_ref())
}

/// Per-word weirdness values as `word, wi`, sorted by descending WI then
/// word.
pub fn emit_wi_csv(report: &WiReport, path: impl AsRef<Path>) -> Result<()> {
    let mut entries: Vec<(&String, &f64)> = report.per_word.iter().collect();
    entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["word", "wi"])?;
    for (word, wi) in entries {
        writer.write_record([word.as_str(), &format!("{wi:.6}")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Token frequencies as `word, count`, most frequent first; the textual
/// stand-in for a word-cloud figure.
pub fn emit_word_frequencies(
    counts: &TokenCounts,
    top: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut entries: Vec<(&String, &u64)> = counts.counts().iter().collect();
    entries.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["word", "count"])?;
    for (word, count) in entries.into_iter().take(top) {
        writer.write_record([word.as_str(), &count.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Plot kinds supported by [`emit_plot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// One bar per series at the series mean.
    Bar,
    /// One five-number box (min, quartiles, max) per series.
    Box,
}

const PLOT_WIDTH: f64 = 640.0;
const PLOT_HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    // Linear interpolation between order statistics.
    let q = |fraction: f64| {
        let pos = fraction * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    (q(0.25), q(0.5), q(0.75))
}

/// Render a bar or box plot to a self-contained SVG file. Output bytes are a
/// pure function of the input.
pub fn emit_plot(
    series: &[(String, Vec<f64>)],
    kind: PlotKind,
    path: impl AsRef<Path>,
) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no series to plot".into()));
    }
    for (name, values) in series {
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("series {name:?} is empty")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("series {name:?} contains non-finite values")));
        }
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, values) in series {
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if kind == PlotKind::Bar {
        lo = lo.min(0.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let span = hi - lo;
    let scale_y = |v: f64| PLOT_HEIGHT - MARGIN - (v - lo) / span * (PLOT_HEIGHT - 2.0 * MARGIN);

    let n = series.len() as f64;
    let slot = (PLOT_WIDTH - 2.0 * MARGIN) / n;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_WIDTH}\" height=\"{PLOT_HEIGHT}\" viewBox=\"0 0 {PLOT_WIDTH} {PLOT_HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        PLOT_HEIGHT - MARGIN,
        PLOT_WIDTH - MARGIN,
        PLOT_HEIGHT - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        PLOT_HEIGHT - MARGIN
    ));
    for (tick, value) in [(0.0, lo), (0.5, lo + span / 2.0), (1.0, hi)] {
        let y = scale_y(lo + tick * span);
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\" font-size=\"10\" text-anchor=\"end\">{value:.2}</text>\n",
            MARGIN - 6.0
        ));
    }

    for (i, (name, values)) in series.iter().enumerate() {
        let center = MARGIN + slot * (i as f64 + 0.5);
        let width = slot * 0.5;
        match kind {
            PlotKind::Bar => {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let top = scale_y(mean.max(0.0));
                let bottom = scale_y(mean.min(0.0).max(lo));
                svg.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{width:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>\n",
                    center - width / 2.0,
                    (bottom - top).abs()
                ));
            }
            PlotKind::Box => {
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| a.total_cmp(b));
                let (q1, median, q3) = quartiles(&sorted);
                let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
                // Whiskers, box, median line.
                svg.push_str(&format!(
                    "<line x1=\"{center:.2}\" y1=\"{:.2}\" x2=\"{center:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
                    scale_y(min),
                    scale_y(max)
                ));
                svg.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{width:.2}\" height=\"{:.2}\" fill=\"lightsteelblue\" stroke=\"black\"/>\n",
                    center - width / 2.0,
                    scale_y(q3),
                    (scale_y(q1) - scale_y(q3)).abs()
                ));
                svg.push_str(&format!(
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                    center - width / 2.0,
                    scale_y(median),
                    center + width / 2.0,
                    scale_y(median)
                ));
            }
        }
        svg.push_str(&format!(
            "<text x=\"{center:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{name}</text>\n",
            PLOT_HEIGHT - MARGIN + 16.0
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path.as_ref(), svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Platform, Post};

    fn sample_rows() -> Vec<ComparisonRow> {
        vec![
            ComparisonRow {
                feature: "sadness".into(),
                mean0: 0.0771,
                std0: 0.131,
                mean1: 0.1758,
                std1: 0.2355,
                p: 0.000061,
                significant: true,
            },
            ComparisonRow {
                feature: "fear".into(),
                mean0: 0.0123,
                std0: 0.007,
                mean1: 0.0141,
                std1: 0.008,
                p: 0.03103,
                significant: true,
            },
        ]
    }

    #[test]
    fn comparison_csv_round_trips_at_printed_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.csv");
        let rows = sample_rows();
        emit_comparison_table(&rows, "Emotion", TableFormat::Csv, &path).unwrap();
        let parsed = parse_comparison_csv(&path, 0.05).unwrap();
        assert_eq!(parsed.len(), rows.len());
        for (a, b) in rows.iter().zip(&parsed) {
            assert_eq!(a.feature, b.feature);
            assert!((a.mean0 - b.mean0).abs() <= 5e-4);
            assert!((a.p - b.p).abs() <= 5e-7);
            assert_eq!(a.significant, b.significant);
        }
    }

    #[test]
    fn comparison_table_rejects_empty_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.csv");
        assert!(emit_comparison_table(&[], "Feature", TableFormat::Csv, &path).is_err());
    }

    #[test]
    fn markdown_table_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.md");
        emit_comparison_table(&sample_rows(), "Emotion", TableFormat::Markdown, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("| Emotion | Mean (0) |"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn metrics_cells_use_plus_minus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let report = MetricsReport {
            accuracy: (0.7604, 0.0173),
            f1: (0.7949, 0.0133),
            precision: (0.7227, 0.0165),
            recall: (0.8831, 0.0087),
        };
        emit_metrics_table(&[("svm".into(), report)], TableFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("0.7949 ± 0.0133"), "{text}");
    }

    #[test]
    fn label_distribution_matches_corpus_counts() {
        let mut posts = Vec::new();
        let mut add = |prefix: &str, platform, label, n| {
            for i in 0..n {
                posts.push(Post {
                    id: format!("{prefix}{i}"),
                    platform,
                    text: String::new(),
                    label: Some(label),
                    emotions: None,
                    lexicon_scores: None,
                    audio_path: None,
                    embedding: None,
                });
            }
        };
        add("tt0-", Platform::Tiktok, 0, 131);
        add("tt1-", Platform::Tiktok, 1, 137);
        add("x0-", Platform::X, 0, 177);
        add("x1-", Platform::X, 1, 205);
        let corpus = Corpus::new(posts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        emit_label_distribution(&corpus, TableFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Label,TikToks,Tweets,Total");
        assert_eq!(lines[1], "0 (Trustworthy),131,177,308");
        assert_eq!(lines[2], "1 (Disinformation),137,205,342");
        assert_eq!(lines[3], "Total,268,382,650");
    }

    #[test]
    fn plots_are_deterministic_and_validate_input() {
        let dir = tempfile::tempdir().unwrap();
        let series = vec![
            ("trustworthy".to_string(), vec![1.0, 2.0, 3.0, 4.0]),
            ("disinformation".to_string(), vec![2.0, 3.5, 5.0, 6.0]),
        ];
        let a = dir.path().join("a.svg");
        let b = dir.path().join("b.svg");
        emit_plot(&series, PlotKind::Box, &a).unwrap();
        emit_plot(&series, PlotKind::Box, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("<svg"));
        assert_eq!(text.matches("<rect").count(), 3); // background + two boxes

        let bad = vec![("broken".to_string(), vec![f64::NAN])];
        let err = emit_plot(&bad, PlotKind::Bar, dir.path().join("c.svg")).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
        assert!(emit_plot(&[], PlotKind::Bar, dir.path().join("d.svg")).is_err());
    }

    #[test]
    fn wi_outputs_are_sorted() {
        use crate::textstats::{weirdness_index, TokenCounts};
        let target = TokenCounts::from_texts(["bulo bulo dana raro"]);
        let reference = TokenCounts::from_texts(["dana normal dana agua"]);
        let report = weirdness_index(&target, &reference).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wi.csv");
        emit_wi_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "word,wi");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "bulo");

        let summary = dir.path().join("summary.csv");
        emit_wi_summary(&[("Tweets".into(), &report)], TableFormat::Csv, &summary).unwrap();
        let text = std::fs::read_to_string(&summary).unwrap();
        assert!(text.contains("WI Global (Mean)"));
        assert!(text.contains('%'));
    }
}
