//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context};

use disinfo_core::audiofeat::{
    feature_names, read_feature_csv, summarize_corpus_audio, write_feature_csv, AudioFeatureVector,
};
use disinfo_core::classify::{
    evaluate_cv, evaluate_model, featurize_text, train_fusion, train_svm, FeatureSpace,
    FusionOptions, LinearModel, ModelSpec, SvmOptions,
};
use disinfo_core::corpus::{load_corpus, Corpus, Platform, Post};
use disinfo_core::llm_annotate::{
    annotate_batch_with_template, collapse_to_binary, write_annotation_csv, BatchConfig,
    EndpointConfig, PromptTemplate,
};
use disinfo_core::report::{
    emit_comparison_table, emit_label_distribution, emit_metrics_table, emit_plot, emit_wi_csv,
    emit_wi_summary, emit_word_frequencies, PlotKind, TableFormat,
};
use disinfo_core::stats::{cohen_kappa, collapse_matrix, compare_groups, ComparisonRow, ConfusionMatrix};
use disinfo_core::textstats::{lexicon_profile, Lexicon, TokenCounts};

use crate::config::AnnotatorConfig;
use crate::{FeatureKind, ModelKind, PlatformFilter};

pub fn ingest(input: &Path, stats: bool, out: Option<&Path>) -> anyhow::Result<()> {
    let corpus = load_corpus(input)?;
    println!("posts={}", corpus.len());
    if stats {
        for (platform, zeros, ones, unlabeled) in corpus.label_distribution() {
            println!("platform={platform} label0={zeros} label1={ones} unlabeled={unlabeled}");
        }
        println!(
            "total label0={} label1={} embedding_dim={}",
            corpus.count_by_label(0),
            corpus.count_by_label(1),
            corpus.embedding_dim().map_or("none".to_string(), |d| d.to_string()),
        );
    }
    if let Some(path) = out {
        corpus.save(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn wi(target: &Path, reference: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let target_corpus = load_corpus(target)?;
    let reference_corpus = load_corpus(reference)?;
    let target_counts = TokenCounts::from_texts(target_corpus.posts().iter().map(|p| p.text.as_str()));
    let reference_counts =
        TokenCounts::from_texts(reference_corpus.posts().iter().map(|p| p.text.as_str()));
    let report = disinfo_core::textstats::weirdness_index(&target_counts, &reference_counts)?;
    println!("mean={:.4}", report.mean);
    println!("median={:.4}", report.median);
    println!("std={:.4}", report.std);
    println!("frac_above_2={:.4}", report.frac_above_2);
    if let Some(path) = out {
        emit_wi_csv(&report, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn audio_extract(corpus: &Path, out: &Path, workers: usize) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus)?;
    let summary = summarize_corpus_audio(&corpus, workers)?;
    if summary.rows.is_empty() {
        eprintln!("warning: no posts with readable audio");
    }
    write_feature_csv(&summary.rows, out)?;
    println!("rows={} failures={}", summary.rows.len(), summary.failures.len());
    for (id, message) in &summary.failures {
        eprintln!("failed {id}: {message}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn filter_platform(corpus: Corpus, filter: PlatformFilter) -> anyhow::Result<Corpus> {
    let platform = match filter {
        PlatformFilter::All => return Ok(corpus),
        PlatformFilter::X => Platform::X,
        PlatformFilter::Tiktok => Platform::Tiktok,
    };
    let posts: Vec<Post> =
        corpus.posts().iter().filter(|p| p.platform == platform).cloned().collect();
    Ok(Corpus::new(posts)?)
}

fn emotion_feature_names(corpus: &Corpus) -> Vec<String> {
    let names: BTreeSet<String> = corpus
        .posts()
        .iter()
        .filter_map(|p| p.emotions.as_ref())
        .flat_map(|m| m.keys().cloned())
        .collect();
    names.into_iter().collect()
}

fn compare_rows(
    corpus: &Corpus,
    kind: FeatureKind,
    alpha: f64,
    audio_features: Option<&Path>,
    lexicon: Option<&Path>,
    workers: usize,
) -> anyhow::Result<Vec<ComparisonRow>> {
    match kind {
        FeatureKind::Emotions => {
            let features = emotion_feature_names(corpus);
            if features.is_empty() {
                bail!("no emotion scores in the corpus");
            }
            Ok(compare_groups(corpus, &features, |post, name| {
                post.emotions.as_ref().and_then(|m| m.get(name).copied())
            }, alpha)?)
        }
        FeatureKind::Lexicon => {
            if let Some(path) = lexicon {
                let lexicon = Lexicon::load(path)?;
                let features: Vec<String> = lexicon.categories.keys().cloned().collect();
                if features.is_empty() {
                    bail!("lexicon has no categories");
                }
                let profiles: BTreeMap<String, BTreeMap<String, f64>> = corpus
                    .posts()
                    .iter()
                    .map(|p| (p.id.clone(), lexicon_profile(&p.text, &lexicon)))
                    .collect();
                Ok(compare_groups(corpus, &features, |post, name| {
                    profiles.get(&post.id).and_then(|m| m.get(name).copied())
                }, alpha)?)
            } else {
                let features: Vec<String> = corpus
                    .posts()
                    .iter()
                    .filter_map(|p| p.lexicon_scores.as_ref())
                    .flat_map(|m| m.keys().cloned())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if features.is_empty() {
                    bail!("no lexicon scores in the corpus; pass --lexicon to compute them");
                }
                Ok(compare_groups(corpus, &features, |post, name| {
                    post.lexicon_scores.as_ref().and_then(|m| m.get(name).copied())
                }, alpha)?)
            }
        }
        FeatureKind::Audio => {
            let table: BTreeMap<String, AudioFeatureVector> = match audio_features {
                Some(path) => read_feature_csv(path)?,
                None => {
                    let summary = summarize_corpus_audio(corpus, workers)?;
                    if !summary.failures.is_empty() {
                        for (id, message) in &summary.failures {
                            eprintln!("failed {id}: {message}");
                        }
                        bail!("{} audio files failed to extract", summary.failures.len());
                    }
                    summary.rows
                }
            };
            // Compare over the posts that have audio rows.
            let posts: Vec<Post> = corpus
                .posts()
                .iter()
                .filter(|p| table.contains_key(&p.id))
                .cloned()
                .collect();
            if posts.is_empty() {
                bail!("no posts with audio features");
            }
            let subset = Corpus::new(posts)?;
            Ok(compare_groups(&subset, feature_names(), |post, name| {
                table.get(&post.id).and_then(|row| row.get(name))
            }, alpha)?)
        }
    }
}

pub struct CompareArgs<'a> {
    pub corpus: &'a Path,
    pub kind: FeatureKind,
    pub alpha: f64,
    pub platform: PlatformFilter,
    pub audio_features: Option<&'a Path>,
    pub lexicon: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub format: &'a str,
    pub workers: usize,
}

pub fn compare(args: CompareArgs<'_>) -> anyhow::Result<()> {
    let corpus = filter_platform(load_corpus(args.corpus)?, args.platform)?;
    let rows = compare_rows(
        &corpus,
        args.kind,
        args.alpha,
        args.audio_features,
        args.lexicon,
        args.workers,
    )?;
    for row in &rows {
        println!(
            "{} mean0={:.3} std0={:.3} mean1={:.3} std1={:.3} p={:.6}{}",
            row.feature,
            row.mean0,
            row.std0,
            row.mean1,
            row.std1,
            row.p,
            if row.significant { " significant" } else { "" },
        );
    }
    if let Some(path) = args.out {
        let format: TableFormat = args.format.parse()?;
        emit_comparison_table(&rows, "Feature", format, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn annotate_llm(
    corpus: &Path,
    out: &Path,
    state: Option<&Path>,
    template: Option<&Path>,
    limit: Option<usize>,
    annotator: &AnnotatorConfig,
) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus)?;
    let url = annotator.url.clone().context("annotator.url missing from config")?;
    let model = annotator.model.clone().context("annotator.model missing from config")?;
    let template = match template {
        Some(path) => PromptTemplate::from_file(path)?,
        None => match &annotator.template {
            Some(path) => PromptTemplate::from_file(path)?,
            None => PromptTemplate::english_v1(),
        },
    };
    let config = BatchConfig {
        endpoint: EndpointConfig {
            url,
            model,
            api_key: None,
            timeout_secs: annotator.timeout_secs.unwrap_or(60),
        },
        concurrency: annotator.concurrency.unwrap_or(4),
        requests_per_second: annotator.requests_per_second.unwrap_or(4.0),
        burst: annotator.burst.unwrap_or(4.0),
        max_retries: annotator.max_retries.unwrap_or(3),
        retry_backoff_ms: annotator.retry_backoff_ms.unwrap_or(500),
    };

    let items: Vec<(String, String)> = corpus
        .posts()
        .iter()
        .filter(|p| !p.text.trim().is_empty())
        .take(limit.unwrap_or(usize::MAX))
        .map(|p| (p.id.clone(), p.text.clone()))
        .collect();
    if items.is_empty() {
        bail!("no posts with text to annotate");
    }

    let default_state = out.with_extension("state.jsonl");
    let state_path = state.unwrap_or(&default_state);
    let report = annotate_batch_with_template(&items, &config, state_path, &template)?;
    write_annotation_csv(&report, out)?;
    println!(
        "completed={} failed={} resumed={}",
        report.completed, report.failed, report.resumed_from_state
    );

    // Agreement against gold labels when both sides are available.
    let gold: BTreeMap<&str, u8> = corpus
        .posts()
        .iter()
        .filter_map(|p| p.label.map(|l| (p.id.as_str(), l)))
        .collect();
    let pairs: Vec<(usize, usize)> = report
        .outcomes
        .iter()
        .filter_map(|o| {
            let label = o.label?;
            let truth = gold.get(o.id.as_str())?;
            Some((*truth as usize, collapse_to_binary(label) as usize))
        })
        .collect();
    if !pairs.is_empty() {
        let matrix = ConfusionMatrix::from_pairs(vec!["0".into(), "1".into()], &pairs)?;
        println!("kappa_binary = {:.3}", cohen_kappa(&matrix)?);
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Parse a collapse mapping of the form `0,1,2->0;3->1`.
fn parse_collapse(spec: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut mapping = BTreeMap::new();
    for group in spec.split(';') {
        let (sources, target) =
            group.split_once("->").with_context(|| format!("bad collapse group {group:?}"))?;
        for source in sources.split(',') {
            mapping.insert(source.trim().to_string(), target.trim().to_string());
        }
    }
    Ok(mapping)
}

pub fn agreement(matrix: &Path, collapse: Option<&str>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(matrix)
        .with_context(|| format!("reading {}", matrix.display()))?;
    let matrix = ConfusionMatrix::from_csv(&text)?;
    let kappa = cohen_kappa(&matrix)?;
    println!("kappa = {kappa:.3}");
    if let Some(spec) = collapse {
        let mapping = parse_collapse(spec)?;
        let collapsed = collapse_matrix(&matrix, |label| mapping.get(label).cloned())?;
        println!("kappa_collapsed = {:.3}", cohen_kappa(&collapsed)?);
    }
    Ok(())
}

fn load_audio_table(
    path: Option<&Path>,
) -> anyhow::Result<Option<BTreeMap<String, AudioFeatureVector>>> {
    Ok(match path {
        Some(path) => Some(read_feature_csv(path)?),
        None => None,
    })
}

pub struct TrainArgs<'a> {
    pub corpus: &'a Path,
    pub model: ModelKind,
    pub folds: usize,
    pub seed: u64,
    pub c: f64,
    pub l2: f64,
    pub audio_features: Option<&'a Path>,
    pub out_model: Option<&'a Path>,
    pub out_metrics: Option<&'a Path>,
}

pub fn train(args: TrainArgs<'_>) -> anyhow::Result<()> {
    let corpus = load_corpus(args.corpus)?;
    let audio = load_audio_table(args.audio_features)?;
    let (spec, name) = match args.model {
        ModelKind::Svm => (
            ModelSpec::Svm(SvmOptions { c: args.c, seed: args.seed, ..Default::default() }),
            "svm+tfidf",
        ),
        ModelKind::Fusion => (
            ModelSpec::Fusion(FusionOptions { l2: args.l2, ..Default::default() }),
            "fusion",
        ),
    };
    let report = evaluate_cv(&corpus, &spec, audio.as_ref(), args.folds, args.seed)?;
    let summary = &report.metrics;
    println!(
        "model={name} folds={} accuracy={:.4}±{:.4} f1={:.4}±{:.4} precision={:.4}±{:.4} recall={:.4}±{:.4}",
        args.folds,
        summary.accuracy.0,
        summary.accuracy.1,
        summary.f1.0,
        summary.f1.1,
        summary.precision.0,
        summary.precision.1,
        summary.recall.0,
        summary.recall.1,
    );
    if let Some(path) = args.out_metrics {
        emit_metrics_table(&[(name.to_string(), summary.clone())], TableFormat::Csv, path)?;
        println!("wrote {}", path.display());
    }

    if let Some(path) = args.out_model {
        // Final model fitted on the full corpus.
        let model = match args.model {
            ModelKind::Svm => {
                let texts: Vec<String> = corpus
                    .posts()
                    .iter()
                    .map(|p| disinfo_core::corpus::clean_text(&p.text))
                    .collect();
                let vocabulary = disinfo_core::textstats::tfidf_fit(&texts)?;
                let x: Vec<_> = corpus
                    .posts()
                    .iter()
                    .map(|p| featurize_text(&p.text, &vocabulary))
                    .collect();
                let y: Vec<u8> = corpus
                    .posts()
                    .iter()
                    .map(|p| p.label.context("post without label"))
                    .collect::<anyhow::Result<_>>()?;
                let trained = train_svm(
                    &x,
                    &y,
                    &SvmOptions { c: args.c, seed: args.seed, ..Default::default() },
                )?;
                LinearModel::from_svm(trained, vocabulary)
            }
            ModelKind::Fusion => {
                let audio = audio.as_ref().context("--audio-features required for fusion")?;
                let mut embeddings = Vec::new();
                let mut rows = Vec::new();
                let mut y = Vec::new();
                for post in corpus.posts() {
                    embeddings.push(
                        post.embedding
                            .clone()
                            .with_context(|| format!("post {} has no embedding", post.id))?,
                    );
                    rows.push(
                        audio
                            .get(&post.id)
                            .with_context(|| format!("post {} has no audio features", post.id))?
                            .ordered_values(),
                    );
                    y.push(post.label.context("post without label")?);
                }
                let trained = train_fusion(
                    &embeddings,
                    &rows,
                    &y,
                    &FusionOptions { l2: args.l2, ..Default::default() },
                )?;
                LinearModel::from_fusion(trained)
            }
        };
        model.save(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn evaluate(model_file: &Path, corpus: &Path, audio_features: Option<&Path>) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus)?;
    let model = LinearModel::load(model_file)?;
    let audio = load_audio_table(audio_features)?;
    if model.feature_space == FeatureSpace::Fusion && audio.is_none() {
        bail!("--audio-features required to evaluate a fusion model");
    }
    let metrics = evaluate_model(&corpus, &model, audio.as_ref())?;
    println!(
        "accuracy={:.4} f1={:.4} precision={:.4} recall={:.4}",
        metrics.accuracy, metrics.f1, metrics.precision, metrics.recall
    );
    Ok(())
}

pub fn report(
    corpus_path: &Path,
    out_dir: &Path,
    audio_features: Option<&Path>,
    lexicon: Option<&Path>,
    alpha: f64,
) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus_path)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let labels_path = out_dir.join("table3_labels.csv");
    emit_label_distribution(&corpus, TableFormat::Csv, &labels_path)?;
    written.push(labels_path);

    // Word frequencies per platform and label, the word-cloud substitute.
    for (platform, filter) in [(Platform::X, "x"), (Platform::Tiktok, "tiktok")] {
        for label in [0u8, 1u8] {
            let counts = TokenCounts::from_texts(
                corpus
                    .posts()
                    .iter()
                    .filter(|p| p.platform == platform && p.label == Some(label))
                    .map(|p| p.text.as_str()),
            );
            if counts.total() == 0 {
                continue;
            }
            let path = out_dir.join(format!("wordfreq_{filter}_{label}.csv"));
            emit_word_frequencies(&counts, 200, &path)?;
            written.push(path);
        }
    }

    // Label distribution bar plot.
    let bar_path = out_dir.join("labels_bar.svg");
    emit_plot(
        &[
            ("trustworthy".to_string(), vec![corpus.count_by_label(0) as f64]),
            ("disinformation".to_string(), vec![corpus.count_by_label(1) as f64]),
        ],
        PlotKind::Bar,
        &bar_path,
    )?;
    written.push(bar_path);

    // Emotion comparisons per platform (Tables 6 and 7 layout).
    for (filter, table_name) in
        [(PlatformFilter::X, "table6_emotions_x"), (PlatformFilter::Tiktok, "table7_emotions_tiktok")]
    {
        let subset = filter_platform(corpus.clone(), filter)?;
        if subset.is_empty() || emotion_feature_names(&subset).is_empty() {
            continue;
        }
        let rows = compare_rows(&subset, FeatureKind::Emotions, alpha, None, None, 4)?;
        let path = out_dir.join(format!("{table_name}.csv"));
        emit_comparison_table(&rows, "Emotion", TableFormat::Csv, &path)?;
        written.push(path);
        if let Some(top) = rows.first() {
            let series = box_series(&subset, &top.feature, |post, name| {
                post.emotions.as_ref().and_then(|m| m.get(name).copied())
            });
            if let Some(series) = series {
                let path = out_dir.join(format!("{table_name}_top.svg"));
                emit_plot(&series, PlotKind::Box, &path)?;
                written.push(path);
            }
        }
    }

    // Lexicon comparisons per platform (Tables 8 and 9 layout).
    let have_lexicon_scores =
        corpus.posts().iter().any(|p| p.lexicon_scores.as_ref().is_some_and(|m| !m.is_empty()));
    if lexicon.is_some() || have_lexicon_scores {
        for (filter, table_name) in [
            (PlatformFilter::Tiktok, "table8_liwc_tiktok"),
            (PlatformFilter::X, "table9_liwc_x"),
        ] {
            let subset = filter_platform(corpus.clone(), filter)?;
            if subset.is_empty() {
                continue;
            }
            let rows = compare_rows(&subset, FeatureKind::Lexicon, alpha, None, lexicon, 4)?;
            let path = out_dir.join(format!("{table_name}.csv"));
            emit_comparison_table(&rows, "Category", TableFormat::Csv, &path)?;
            written.push(path);
        }
    }

    // Audio comparison (Table 10 layout) from a prepared feature table.
    if let Some(path) = audio_features {
        let rows = compare_rows(&corpus, FeatureKind::Audio, alpha, Some(path), None, 4)?;
        let table_path = out_dir.join("table10_audio.csv");
        emit_comparison_table(&rows, "Feature", TableFormat::Csv, &table_path)?;
        written.push(table_path);
    }

    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn box_series<F>(corpus: &Corpus, feature: &str, extract: F) -> Option<Vec<(String, Vec<f64>)>>
where
    F: Fn(&Post, &str) -> Option<f64>,
{
    let mut group0 = Vec::new();
    let mut group1 = Vec::new();
    for post in corpus.posts() {
        let value = extract(post, feature)?;
        match post.label {
            Some(0) => group0.push(value),
            Some(1) => group1.push(value),
            _ => return None,
        }
    }
    if group0.is_empty() || group1.is_empty() {
        return None;
    }
    Some(vec![
        (format!("{feature} (0)"), group0),
        (format!("{feature} (1)"), group1),
    ])
}
