//! `disinfo` — command-line driver for the analysis pipeline:
//! ingest → extract → compare → annotate → train → evaluate → report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Config;

#[derive(Parser)]
#[command(name = "disinfo", version, about = "Multimodal disinformation analysis toolkit")]
struct Cli {
    /// TOML config file supplying defaults for flags and endpoint settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed controlling all randomized steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureKind {
    Emotions,
    Lexicon,
    Audio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Svm,
    Fusion,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlatformFilter {
    X,
    Tiktok,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus; optionally print label statistics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Print counts by platform and label.
        #[arg(long)]
        stats: bool,
        /// Re-serialize the validated corpus to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weirdness index of a target corpus against a reference corpus.
    Wi {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Per-word CSV output (word, wi).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary-statistics table output (mean, median, std, words > 2).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Extract the audio feature table for every post with audio.
    AudioExtract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare a feature family between label groups (Mann–Whitney U).
    Compare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        features: FeatureKind,
        #[arg(long)]
        alpha: Option<f64>,
        /// Restrict to one platform before comparing.
        #[arg(long, value_enum, default_value_t = PlatformFilter::All)]
        platform: PlatformFilter,
        /// Feature CSV produced by audio-extract (required for --features audio
        /// unless posts carry audio paths).
        #[arg(long)]
        audio_features: Option<PathBuf>,
        /// Lexicon file; when given, profiles are computed from post text.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Annotate posts through the configured chat-completion endpoint.
    AnnotateLlm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Resumable state file (defaults to <out>.state.jsonl).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Custom prompt template file.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Annotate only the first N posts.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Cohen's kappa of an agreement matrix CSV.
    Agreement {
        #[arg(long)]
        matrix: PathBuf,
        /// Optional category merge, e.g. "0,1,2->0;3->1"; prints the
        /// collapsed kappa as well.
        #[arg(long)]
        collapse: Option<String>,
    },
    /// Train a detection model under stratified cross-validation.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        audio_features: Option<PathBuf>,
        /// Hinge-loss weight for the SVM.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// L2 penalty for the fusion head.
        #[arg(long, default_value_t = 1e-2)]
        l2: f64,
        /// Where to store the model trained on the full corpus.
        #[arg(long)]
        out_model: Option<PathBuf>,
        /// Where to store the cross-validation metrics table.
        #[arg(long)]
        out_metrics: Option<PathBuf>,
    },
    /// Evaluate a stored model file on a labeled corpus.
    Evaluate {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        audio_features: Option<PathBuf>,
    },
    /// Emit the full set of analysis tables and plots.
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        audio_features: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(config) => config,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
        },
        None => Config::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(7);

    let result = match cli.command {
        Command::Ingest { input, stats, out } => commands::ingest(&input, stats, out.as_deref()),
        Command::Wi { target, reference, out } => commands::wi(&target, &reference, out.as_deref()),
        Command::AudioExtract { corpus, out, workers } => {
            let workers = workers.or(config.workers).unwrap_or(4);
            commands::audio_extract(&corpus, &out, workers)
        }
        Command::Compare {
            corpus,
            features,
            alpha,
            platform,
            audio_features,
            lexicon,
            out,
            format,
        } => commands::compare(commands::CompareArgs {
            corpus: &corpus,
            kind: features,
            alpha: alpha.or(config.alpha).unwrap_or(0.05),
            platform,
            audio_features: audio_features.as_deref(),
            lexicon: lexicon.as_deref(),
            out: out.as_deref(),
            format: &format,
            workers: config.workers.unwrap_or(4),
        }),
        Command::AnnotateLlm { corpus, out, state, template, limit } => commands::annotate_llm(
            &corpus,
            &out,
            state.as_deref(),
            template.as_deref(),
            limit,
            &config.annotator,
        ),
        Command::Agreement { matrix, collapse } => {
            commands::agreement(&matrix, collapse.as_deref())
        }
        Command::Train { model, folds, corpus, audio_features, c, l2, out_model, out_metrics } => {
            commands::train(commands::TrainArgs {
                corpus: &corpus,
                model,
                folds,
                seed,
                c,
                l2,
                audio_features: audio_features.as_deref(),
                out_model: out_model.as_deref(),
                out_metrics: out_metrics.as_deref(),
            })
        }
        Command::Evaluate { model_file, corpus, audio_features } => {
            commands::evaluate(&model_file, &corpus, audio_features.as_deref())
        }
        Command::Report { corpus, out_dir, audio_features, lexicon, alpha } => commands::report(
            &corpus,
            &out_dir,
            audio_features.as_deref(),
            lexicon.as_deref(),
            alpha.or(config.alpha).unwrap_or(0.05),
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One machine-parsable line on stderr.
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
