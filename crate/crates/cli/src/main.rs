//! `nslids`: ingest, discretize, select, train, evaluate and compare
//! intrusion-detection pipelines on NSL-KDD style data.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ids_core::data::{
    extract_target_counts, map_labels, parse_records, Dataset, FeatureSchema, Granularity, EXTRACT_NORMAL_COUNT,
};
use ids_core::discretize::{apply_discretizer, fit_discretizer, DiscretizationModel};
use ids_core::eval::{aggregate, confusion, per_class_metrics, EvaluationReport};
use ids_core::experiment::{
    reproduce_tables, run_experiment, DiscretizationMode, PipelineConfig, SampleMode, Stage, StageError, TablesOptions,
    TrainedPipeline,
};
use ids_core::select::{run_selection, SelectionKind};
use ids_core::synthetic::nsl_like;
use ids_core::table::DiscreteTable;
use ids_core::Error;

const DATA_DIR_VAR: &str = "NSLKDD_DIR";
const DEFAULT_TRAIN_FILE: &str = "KDDTrain+.txt";

#[derive(Parser)]
#[command(
    name = "nslids",
    version,
    about = "Discretize, select features, train and evaluate NSL-KDD intrusion detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset file and print its label histogram.
    Ingest(IngestArgs),
    /// Fit MDLP cut points and optionally write the discretized data.
    Discretize(DiscretizeArgs),
    /// Run one feature selector on the discretized data.
    Select(SelectArgs),
    /// Fit the full pipeline on a dataset and save the model.
    Train(TrainArgs),
    /// Score a saved model on a labelled dataset.
    Eval(EvalArgs),
    /// Cross-validate a configured pipeline and write its artifacts.
    Run(RunArgs),
    /// Run the selector comparison at both granularities plus the
    /// per-attack boosting breakdown.
    ReproduceTables(TablesArgs),
    /// Write a seeded synthetic dataset with NSL-KDD's shape and label mix.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset file (42 or 43 comma-separated fields per line). Relative
    /// paths are resolved against $NSLKDD_DIR when it is set.
    #[arg(long, short)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "attack23")]
    granularity: Granularity,
    /// Write the label-mapped records as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscretizeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Cut points as JSON.
    #[arg(long)]
    model_out: PathBuf,
    /// Discretized records as CSV.
    #[arg(long)]
    data_out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "attack23")]
    granularity: Granularity,
    #[arg(long, default_value = "hybrid")]
    method: SelectionKind,
    /// Threshold on normalized scores; ranking methods only.
    #[arg(long)]
    alpha: Option<f64>,
    /// Full selection result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Pipeline settings shared by `train` and `run`; each overrides the
/// matching key of the config file.
#[derive(Args)]
struct PipelineFlags {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    granularity: Option<Granularity>,
    #[arg(long)]
    method: Option<SelectionKind>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Plain naive Bayes instead of AdaBoost.M1.
    #[arg(long)]
    no_boost: bool,
    #[arg(long)]
    rounds: Option<usize>,
    /// `fold-safe` or `leaky`.
    #[arg(long)]
    discretization: Option<DiscretizationMode>,
    /// Draw the reference class distribution before anything else.
    #[arg(long)]
    sample: bool,
    #[arg(long)]
    sample_seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Where to write the model JSON.
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model written by `train` or `run`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Rerun exactly the configuration recorded in an earlier report.
    #[arg(long, conflicts_with = "config")]
    from_report: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Use every input record instead of drawing the reference distribution.
    #[arg(long)]
    no_sample: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = ids_core::classify::DEFAULT_ROUNDS)]
    rounds: usize,
    /// Refit discretization and selection inside every fold.
    #[arg(long)]
    fold_safe: bool,
    #[arg(long, default_value = "tables")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Fraction of the reference class counts to generate; every label
    /// keeps at least one record.
    #[arg(long, default_value_t = 0.01)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Everything `run --from-report` needs to repeat an evaluation.
#[derive(Serialize, Deserialize)]
struct RunReport {
    config: PipelineConfig,
    evaluation: EvaluationReport,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    stage: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            stage: "usage",
            message: message.into(),
        }
    }

    fn io(stage: Stage, path: &Path, err: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            stage: stage.name(),
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        let code = match e.source {
            Error::InvalidArgument(_) => 1,
            _ => 2,
        };
        Self {
            code,
            stage: e.stage.name(),
            message: e.source.to_string(),
        }
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> Failure {
    move |source| StageError { stage, source }.into()
}

type CliResult<T = ()> = Result<T, Failure>;

fn resolve_input(given: Option<&Path>) -> CliResult<PathBuf> {
    let dir = std::env::var_os(DATA_DIR_VAR).map(PathBuf::from);
    match (given, dir) {
        (Some(p), Some(d)) if p.is_relative() && !p.exists() => Ok(d.join(p)),
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(d)) => Ok(d.join(DEFAULT_TRAIN_FILE)),
        (None, None) => Err(Failure::usage(format!(
            "no input given; pass --input or set {DATA_DIR_VAR}"
        ))),
    }
}

fn load(input: &InputArgs) -> CliResult<Dataset> {
    let path = resolve_input(input.input.as_deref())?;
    let file = File::open(&path).map_err(|e| Failure::io(Stage::Ingest, &path, e))?;
    parse_records(BufReader::new(file), &FeatureSchema::nsl_kdd()).map_err(|e| Failure::io(Stage::Ingest, &path, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::io(Stage::Report, parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(Stage::Report, path, e))
}

fn write_csv(ds: &Dataset, path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::io(Stage::Report, parent, e))?;
    }
    let file = File::create(path).map_err(|e| Failure::io(Stage::Report, path, e))?;
    let mut out = BufWriter::new(file);
    ds.write_csv(&mut out)
        .map_err(|e| Failure::io(Stage::Report, path, e))?;
    out.flush().map_err(|e| Failure::io(Stage::Report, path, e))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| at(Stage::Report)(e.into()))
}

fn ingest(args: IngestArgs) -> CliResult {
    let ds = map_labels(&load(&args.input)?, args.granularity).map_err(at(Stage::LabelMap))?;
    println!("{} records, {} features", ds.len(), ds.schema().len());
    for (label, n) in ds.label_histogram() {
        println!("{label:<16} {n:>8}");
    }
    if let Some(out) = &args.out {
        write_csv(&ds, out)?;
    }
    Ok(())
}

fn discretize(args: DiscretizeArgs) -> CliResult {
    let ds = load(&args.input)?;
    let model = fit_discretizer(&ds);
    for c in &model.features {
        println!("feature {:>2}: {} bins", c.feature_index, c.n_bins());
    }
    write_file(&args.model_out, &model.to_json().map_err(at(Stage::Report))?)?;
    if let Some(out) = &args.data_out {
        write_csv(&apply_discretizer(&model, &ds).map_err(at(Stage::Discretize))?, out)?;
    }
    Ok(())
}

fn select(args: SelectArgs) -> CliResult {
    let ds = map_labels(&load(&args.input)?, args.granularity).map_err(at(Stage::LabelMap))?;
    let disc: DiscretizationModel = fit_discretizer(&ds);
    let table = DiscreteTable::encode(&ds, Some(&disc)).map_err(at(Stage::Discretize))?;
    let result = run_selection(&table, args.method, args.alpha).map_err(at(Stage::Select))?;
    let names: Vec<String> = result
        .sorted_features()
        .iter()
        .map(|&f| format!("{f}:{}", ds.schema().feature(f).name))
        .collect();
    println!("{} selected {} features", args.method, names.len());
    println!("{}", names.join(" "));
    if let Some(m) = result.merit {
        println!("merit {m:.6}");
    }
    if let Some(out) = &args.out {
        write_file(out, &to_json(&result)?)?;
    }
    Ok(())
}

fn pipeline_config(flags: &PipelineFlags, base: Option<PipelineConfig>) -> CliResult<PipelineConfig> {
    let mut config = match (base, &flags.config) {
        (Some(c), _) => c,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(Stage::Ingest, path, e))?;
            toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {}", path.display(), e.message())))?
        }
        (None, None) => PipelineConfig::default(),
    };
    if let Some(p) = &flags.input.input {
        config.input = Some(p.clone());
    }
    if let Some(g) = flags.granularity {
        config.granularity = g;
    }
    if let Some(m) = flags.method {
        config.selection.method = m;
        config.selection.alpha = None;
    }
    if flags.alpha.is_some() {
        config.selection.alpha = flags.alpha;
    }
    if flags.no_boost {
        config.classifier.boost = false;
    }
    if let Some(r) = flags.rounds {
        config.classifier.rounds = r;
    }
    if let Some(d) = flags.discretization {
        config.discretization = d;
    }
    if flags.sample {
        config.sample.mode = SampleMode::Extract;
    }
    if let Some(s) = flags.sample_seed {
        config.sample.seed = s;
    }
    if let Some(k) = flags.folds {
        config.cv.k = k;
    }
    if let Some(s) = flags.seed {
        config.cv.seed = s;
    }
    if let Some(d) = &flags.out_dir {
        config.output.dir = Some(d.clone());
    }
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(config)
}

fn load_configured(config: &PipelineConfig) -> CliResult<Dataset> {
    load(&InputArgs {
        input: config.input.clone(),
    })
}

fn train(args: TrainArgs) -> CliResult {
    let config = pipeline_config(&args.pipeline, None)?;
    let raw = load_configured(&config)?;
    let (ds, _) = ids_core::experiment::prepare_dataset(&raw, &config)?;
    let (trained, selection) = TrainedPipeline::fit(&ds, &config.model(), None)?;
    println!("{}", config.model().describe());
    println!(
        "trained on {} records, features {:?}",
        ds.len(),
        selection.sorted_features()
    );
    write_file(&args.model_out, &trained.to_json().map_err(at(Stage::Report))?)
}

fn eval(args: EvalArgs) -> CliResult {
    let text = fs::read_to_string(&args.model).map_err(|e| Failure::io(Stage::Ingest, &args.model, e))?;
    let model = TrainedPipeline::from_json(&text).map_err(|e| Failure::io(Stage::Ingest, &args.model, e))?;
    let ds = map_labels(&load(&args.input)?, model.granularity).map_err(at(Stage::LabelMap))?;
    let truths: Vec<String> = ds.records().iter().map(|r| r.label.clone()).collect();
    let preds: Vec<String> = ds.records().iter().map(|r| model.predict(r)).collect();
    let mut labels = ds.label_set();
    for l in model.classifier.labels() {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    labels.sort();
    let matrix = confusion(&truths, &preds, &labels).map_err(at(Stage::Evaluate))?;
    let per_class = per_class_metrics(&matrix);
    let w = aggregate(&per_class).map_err(at(Stage::Evaluate))?;
    println!(
        "{:<16} {:>8} {:>9} {:>7} {:>9} {:>7}",
        "class", "support", "precision", "recall", "F-measure", "FPR"
    );
    for c in &per_class {
        println!(
            "{:<16} {:>8} {:>9.3} {:>7.3} {:>9.3} {:>7.3}",
            c.label, c.support, c.precision, c.recall, c.f_measure, c.fpr
        );
    }
    println!(
        "{:<16} {:>8} {:>9.3} {:>7.3} {:>9.3} {:>7.3}",
        "weighted",
        matrix.total(),
        w.precision,
        w.recall,
        w.f_measure,
        w.fpr
    );
    println!("accuracy      {:.4}", matrix.accuracy());
    Ok(())
}

fn run(args: RunArgs) -> CliResult {
    let base = match &args.from_report {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(Stage::Ingest, path, e))?;
            let report: RunReport = serde_json::from_str(&text).map_err(|e| Failure::io(Stage::Ingest, path, e))?;
            Some(report.config)
        }
        None => None,
    };
    let config = pipeline_config(&args.pipeline, base)?;
    let raw = load_configured(&config)?;
    let out = run_experiment(&raw, &config)?;
    print!("{}", out.report.render());

    if let Some(dir) = &config.output.dir {
        let report = RunReport {
            config: config.clone(),
            evaluation: out.report.clone(),
        };
        write_file(&dir.join("report.json"), &to_json(&report)?)?;
        write_file(&dir.join("report.txt"), &out.report.render())?;
        write_file(&dir.join("selection.json"), &to_json(&out.selection)?)?;
        write_file(
            &dir.join("model.json"),
            &out.trained.to_json().map_err(at(Stage::Report))?,
        )?;
        if let Some(m) = &out.manifest {
            write_file(&dir.join("manifest.json"), &to_json(m)?)?;
        }
    }
    Ok(())
}

fn tables(args: TablesArgs) -> CliResult {
    if args.folds < 2 {
        return Err(Failure::usage(format!(
            "fold count must be at least 2, got {}",
            args.folds
        )));
    }
    let raw = load(&args.input)?;
    let mut options = TablesOptions::default();
    options.sample.seed = args.seed;
    options.cv.seed = args.seed;
    options.cv.k = args.folds;
    options.rounds = args.rounds;
    if args.no_sample {
        options.sample.mode = SampleMode::None;
    }
    if args.fold_safe {
        options.discretization = DiscretizationMode::FoldSafe;
    }
    let tables = reproduce_tables(&raw, &options)?;
    let text = tables.render();
    print!("{text}");
    write_file(&args.out_dir.join("tables.txt"), &text)?;
    write_file(
        &args.out_dir.join("tables.json"),
        &tables.to_json().map_err(at(Stage::Report))?,
    )
}

fn synth(args: SynthArgs) -> CliResult {
    if !(args.scale > 0.0 && args.scale <= 1.0) {
        return Err(Failure::usage(format!("scale must lie in (0, 1], got {}", args.scale)));
    }
    let counts: Vec<(String, usize)> = extract_target_counts(EXTRACT_NORMAL_COUNT)
        .into_iter()
        .map(|(label, n)| {
            let scaled = ((n as f64 * args.scale).round() as usize).max(1);
            (label, scaled)
        })
        .collect();
    let refs: Vec<(&str, usize)> = counts.iter().map(|(l, n)| (l.as_str(), *n)).collect();
    let ds = nsl_like(&refs, args.seed);
    write_csv(&ds, &args.out)?;
    println!("wrote {} records to {}", ds.len(), args.out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Discretize(a) => discretize(a),
        Command::Select(a) => select(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a),
        Command::ReproduceTables(a) => tables(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| info.payload().downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unexpected failure".to_string());
        if msg.contains("Broken pipe") {
            // Output consumer went away (e.g. `| head`); nothing to report.
            std::process::exit(0);
        }
        eprintln!("error [internal]: {}", msg.replace('\n', " "));
    }));
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error [{}]: {}", f.stage, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}
