//! `emoflow`: command-line driver for the emotion-classification experiment
//! pipeline. Stage failures exit with distinct codes (config 2, load 3,
//! clean 4, balance 5, split 6, tokenize 7, train 8, tune 9, bag 10,
//! evaluate 11, report 12, translate 13).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emoflow_core::augment::{plan_balance, undersample};
use emoflow_core::corpus::{label_distribution, load_dataset, ColumnMap, LabeledDataset};
use emoflow_core::experiment::{
    evaluate_model, render_report, run_experiment, warm_translation_cache, BalanceMode,
    ExperimentConfig, ExperimentError, RunMode, RunOutcome, Stage,
};
use emoflow_core::metrics::MetricReport;
use emoflow_core::preprocess::{load_stopwords, CleanConfig};
use emoflow_core::splitprep::{stratified_split, SplitRatios};
use emoflow_core::translate::PivotLanguage;

#[derive(Parser)]
#[command(
    name = "emoflow",
    version,
    about = "Emotion classification experiments over Indonesian e-commerce reviews"
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every stage seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a review table and print its label distribution.
    Load(LoadArgs),
    /// Clean a dataset file (JSON-lines interchange format).
    Clean(CleanArgs),
    /// Balance a dataset file by undersampling or augmentation.
    Balance(BalanceArgs),
    /// Stratified train/validation/test split of a dataset file.
    Split(SplitArgs),
    /// Run the configured training experiment.
    Train,
    /// Run the configured hyperparameter grid search.
    Tune,
    /// Run the configured bagging ensemble.
    Bag,
    /// Evaluate a saved model on a dataset file.
    Evaluate(EvaluateArgs),
    /// Render result tables from completed runs.
    Report(ReportArgs),
    /// Translation cache maintenance.
    TranslateCache(TranslateCacheArgs),
}

#[derive(Args)]
struct LoadArgs {
    /// Comma-delimited table with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Header name of the review text column.
    #[arg(long = "text-col", default_value_t = ColumnMap::default().text_column)]
    text_col: String,
    /// Header name of the emotion label column.
    #[arg(long = "label-col", default_value_t = ColumnMap::default().label_column)]
    label_col: String,
    /// Write the loaded dataset as JSON lines.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct CleanArgs {
    /// Dataset file produced by `load --save`.
    #[arg(long)]
    input: PathBuf,
    /// Stopword file, one token per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Remove stopwords during cleaning.
    #[arg(long, conflicts_with = "keep_stopwords")]
    drop_stopwords: bool,
    /// Keep stopwords (the default, and the better-performing variant).
    #[arg(long)]
    keep_stopwords: bool,
    /// Where to write the cleaned dataset.
    #[arg(long)]
    save: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BalanceModeArg {
    Undersample,
    Augment,
}

#[derive(Args)]
struct BalanceArgs {
    /// Dataset file to balance; defaults to running the configured pipeline
    /// up to the balance stage.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: BalanceModeArg,
    /// Per-label target count (augment mode; default: the maximum label
    /// count).
    #[arg(long)]
    target: Option<usize>,
    /// Where to write the balanced dataset.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Dataset file to split.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated train,validation,test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: String,
    /// Directory receiving train/validation/test.jsonl.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model directory.
    #[arg(long)]
    model: PathBuf,
    /// Dataset file (JSON lines) to evaluate on.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run ids to collate (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    runs: Vec<String>,
}

#[derive(Args)]
struct TranslateCacheArgs {
    #[command(subcommand)]
    action: TranslateCacheCommand,
}

#[derive(Subcommand)]
enum TranslateCacheCommand {
    /// Round-trip every cleaned text through a pivot into the cache.
    Warm {
        /// Pivot language: en or ar.
        #[arg(long)]
        pivot: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.stage_of().exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        ExperimentError::stage(Stage::Config, "this command needs --config <path>")
    })?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        apply_seed(&mut config, seed);
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

/// Points every stage seed at one value: balance, split, train config seeds
/// and the ensemble base seed.
fn apply_seed(config: &mut ExperimentConfig, seed: u64) {
    config.balance.seed = seed;
    config.split.seed = seed;
    if let Some(train) = &mut config.train {
        train.config.seed = seed;
    }
    if let Some(tune) = &mut config.tune {
        tune.base.seed = seed;
    }
    if let Some(bag) = &mut config.bag {
        bag.base_seed = seed;
        for member in &mut bag.members {
            member.config.seed = seed;
        }
    }
}

fn expect_mode(config: &ExperimentConfig, expected: RunMode) -> Result<(), ExperimentError> {
    let mode = config.mode()?;
    if mode != expected {
        return Err(ExperimentError::stage(
            Stage::Config,
            format!(
                "config declares a [{}] run but the {} subcommand was invoked",
                mode.tag(),
                expected.tag()
            ),
        ));
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<LabeledDataset, ExperimentError> {
    LabeledDataset::read_jsonl(path).map_err(|e| ExperimentError::stage(Stage::Load, e.to_string()))
}

fn print_distribution(dataset: &LabeledDataset) {
    println!("records: {}", dataset.len());
    println!("{:<10} {:>8}", "label", "count");
    for (label, count) in label_distribution(dataset).iter() {
        println!("{:<10} {:>8}", label.as_str(), count);
    }
}

fn print_metrics(report: &MetricReport) {
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        report.accuracy, report.weighted_precision, report.weighted_recall, report.weighted_f1
    );
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>8}",
        "label", "precision", "recall", "f1", "support"
    );
    for (label, per_class) in emoflow_core::EmotionLabel::ALL
        .iter()
        .zip(&report.per_class)
    {
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            label.as_str(),
            per_class.precision,
            per_class.recall,
            per_class.f1,
            per_class.support
        );
    }
}

fn run_configured(cli: &Cli, expected: RunMode) -> Result<(), ExperimentError> {
    let config = load_config(cli)?;
    expect_mode(&config, expected)?;
    let record = run_experiment(&config)?;
    println!("run {} completed", record.run_id);
    println!(
        "artifacts: {}",
        config
            .output
            .dir
            .join("runs")
            .join(&record.run_id)
            .display()
    );
    match &record.outcome {
        RunOutcome::Train {
            test_report,
            selected_epoch,
            ..
        } => {
            println!("selected epoch: {selected_epoch}");
            println!("test split:");
            print_metrics(test_report);
        }
        RunOutcome::Tune { result, .. } => {
            let best = result.best_row();
            println!(
                "best cell: epochs {} dropout {} weight_decay {} batch {} (eval accuracy {})",
                best.config.epochs,
                best.config.dropout_probability,
                best.config.weight_decay,
                best.config.batch_size,
                best.eval_accuracy()
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_default()
            );
            println!("ranked rows: {}", result.rows.len());
        }
        RunOutcome::Bag { test_report, .. } => {
            println!("test split:");
            print_metrics(test_report);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match &cli.command {
        Command::Load(args) => {
            let columns = ColumnMap {
                text_column: args.text_col.clone(),
                label_column: args.label_col.clone(),
            };
            let dataset = load_dataset(&args.input, &columns)
                .map_err(|e| ExperimentError::stage(Stage::Load, e.to_string()))?;
            print_distribution(&dataset);
            if let Some(save) = &args.save {
                dataset
                    .write_jsonl(save)
                    .map_err(|e| ExperimentError::stage(Stage::Load, e.to_string()))?;
                println!("saved {}", save.display());
            }
            Ok(())
        }
        Command::Clean(args) => {
            let dataset = read_dataset(&args.input)?;
            let mut clean = CleanConfig::new();
            clean.remove_stopwords = args.drop_stopwords && !args.keep_stopwords;
            if clean.remove_stopwords {
                let path = args.stopwords.as_ref().ok_or_else(|| {
                    ExperimentError::stage(
                        Stage::Clean,
                        "--drop-stopwords needs --stopwords <path>",
                    )
                })?;
                let words = load_stopwords(path)
                    .map_err(|e| ExperimentError::stage(Stage::Clean, e.to_string()))?;
                clean = clean
                    .with_stopwords(words)
                    .map_err(|e| ExperimentError::stage(Stage::Clean, e.to_string()))?;
            }
            let mut kept = Vec::new();
            let mut dropped = 0usize;
            for record in dataset.records() {
                let text = emoflow_core::preprocess::clean_pipeline(&record.text, &clean);
                if text.trim().is_empty() {
                    dropped += 1;
                    continue;
                }
                let mut cleaned = record.clone();
                cleaned.text = text;
                kept.push(cleaned);
            }
            let cleaned = LabeledDataset::from_records_detached(kept)
                .map_err(|e| ExperimentError::stage(Stage::Clean, e.to_string()))?;
            cleaned
                .write_jsonl(&args.save)
                .map_err(|e| ExperimentError::stage(Stage::Clean, e.to_string()))?;
            println!(
                "cleaned {} records ({dropped} dropped as empty) -> {}",
                cleaned.len(),
                args.save.display()
            );
            Ok(())
        }
        Command::Balance(args) => {
            match (args.mode, &args.input) {
                (BalanceModeArg::Undersample, Some(input)) => {
                    let dataset = read_dataset(input)?;
                    let seed = cli.seed.unwrap_or(42);
                    let balanced = undersample(&dataset, seed)
                        .map_err(|e| ExperimentError::stage(Stage::Balance, e.to_string()))?;
                    print_distribution(&balanced);
                    if let Some(save) = &args.save {
                        balanced
                            .write_jsonl(save)
                            .map_err(|e| ExperimentError::stage(Stage::Balance, e.to_string()))?;
                        println!("saved {}", save.display());
                    }
                    Ok(())
                }
                (BalanceModeArg::Augment, Some(input)) => {
                    // Augmentation needs the translation and lexicon settings
                    // from the config; the plan itself comes from flags.
                    let mut config = load_config(&cli)?;
                    config.balance.mode = BalanceMode::Augment;
                    config.balance.target = args.target;
                    let dataset = read_dataset(input)?;
                    let plan = plan_balance(&dataset, args.target);
                    println!(
                        "balance target {} (total deficit {})",
                        plan.target,
                        plan.total_deficit()
                    );
                    let balanced =
                        emoflow_core::experiment::balance_with_config(&config, &dataset)?;
                    print_distribution(&balanced);
                    if let Some(save) = &args.save {
                        balanced
                            .write_jsonl(save)
                            .map_err(|e| ExperimentError::stage(Stage::Balance, e.to_string()))?;
                        println!("saved {}", save.display());
                    }
                    Ok(())
                }
                (_, None) => Err(ExperimentError::stage(
                    Stage::Balance,
                    "balance needs --input <dataset.jsonl>",
                )),
            }
        }
        Command::Split(args) => {
            let dataset = read_dataset(&args.input)?;
            let parts: Vec<f64> = args
                .ratios
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ExperimentError::stage(Stage::Split, format!("bad ratios: {e}")))?;
            if parts.len() != 3 {
                return Err(ExperimentError::stage(
                    Stage::Split,
                    "ratios must be three comma-separated fractions",
                ));
            }
            let ratios = SplitRatios::new(parts[0], parts[1], parts[2])
                .map_err(|e| ExperimentError::stage(Stage::Split, e.to_string()))?;
            let seed = cli.seed.unwrap_or(42);
            let (train, validation, test) = stratified_split(&dataset, ratios, seed)
                .map_err(|e| ExperimentError::stage(Stage::Split, e.to_string()))?;
            std::fs::create_dir_all(&args.out_dir)
                .map_err(|e| ExperimentError::stage(Stage::Split, e.to_string()))?;
            for (split, name) in [
                (&train, "train"),
                (&validation, "validation"),
                (&test, "test"),
            ] {
                let path = args.out_dir.join(format!("{name}.jsonl"));
                split
                    .write_jsonl(&path)
                    .map_err(|e| ExperimentError::stage(Stage::Split, e.to_string()))?;
                println!("{name}: {} records -> {}", split.len(), path.display());
            }
            Ok(())
        }
        Command::Train => run_configured(&cli, RunMode::Train),
        Command::Tune => run_configured(&cli, RunMode::Tune),
        Command::Bag => run_configured(&cli, RunMode::Bag),
        Command::Evaluate(args) => {
            let report = evaluate_model(&args.model, &args.data)?;
            print_metrics(&report);
            Ok(())
        }
        Command::Report(args) => {
            if args.runs.is_empty() {
                eprintln!("note: no run ids given; writing header-only tables");
            }
            let config = load_config(&cli)?;
            let written = render_report(&config.output.dir, &args.runs)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::TranslateCache(args) => match &args.action {
            TranslateCacheCommand::Warm { pivot } => {
                let pivot = PivotLanguage::parse(pivot).ok_or_else(|| {
                    ExperimentError::stage(
                        Stage::Translate,
                        format!("unknown pivot {pivot:?}; expected en or ar"),
                    )
                })?;
                let config = load_config(&cli)?;
                let stats = warm_translation_cache(&config, pivot)?;
                println!(
                    "warmed {} texts; cache now holds {} entries",
                    stats.texts, stats.cached_entries
                );
                Ok(())
            }
        },
    }
}
