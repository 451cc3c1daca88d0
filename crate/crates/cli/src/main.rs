//! `radarbeam`: simulate datasets, compute feature maps, train and evaluate
//! beam predictors, and time the pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radarbeam::config::{ConfigError, RunConfig};
use radarbeam::dataset::{add_features, read_dataset, Dataset, DatasetWriter, FeatureSet, Split};
use radarbeam::dsp::{FeatureKind, Preprocessor};
use radarbeam::eval::{
    benchmark, run_experiment, topk_accuracy, write_csv, write_jsonl, BenchSpec, EvalReport, ExperimentSpec, Predictor,
    RunResult, TimingRow,
};
use radarbeam::exec::{with_threads, Exec};
use radarbeam::lut::LookupTable;
use radarbeam::nn::{load_checkpoint, predict_scores, save_checkpoint, topk_indices, EpochMetrics, Variant};
use radarbeam::pipeline::{dataset_header, dataset_tensors, generate_scenes, Pipeline};
use radarbeam::sim::derive_radar_limits;
use radarbeam::ErrorCategory;
use serde::Serialize;
use thiserror::Error;

/// Name of the resolved-config snapshot written next to every output.
const SNAPSHOT: &str = "config.toml";

/// Scenes synthesized per parallel batch while streaming a dataset to disk.
const SIM_CHUNK: usize = 64;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] radarbeam::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let category = match self {
            CliError::Core(e) => e.category(),
            CliError::Usage(_) => ErrorCategory::Config,
            CliError::Io { .. } => ErrorCategory::Internal,
        };
        match category {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Internal => 4,
        }
    }
}

macro_rules! core_err {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_err!(
    ConfigError,
    radarbeam::dataset::DatasetError,
    radarbeam::dsp::DspError,
    radarbeam::nn::NnError,
    radarbeam::lut::LutError,
    radarbeam::eval::EvalError
);

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "radarbeam", version, about = "Radar-aided mmWave beam prediction")]
struct Cli {
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Runs every batch loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generates scenes, synthesizes radar frames, labels beams and writes a
    /// dataset directory.
    Simulate(SimulateArgs),
    /// Computes feature maps from the stored raw cubes and adds them to a
    /// dataset.
    Preprocess(PreprocessArgs),
    /// Trains CNN predictors over several seeds and reports test accuracy.
    Train(TrainArgs),
    /// Fits and evaluates lookup-table baselines.
    Baseline(BaselineArgs),
    /// Scores a checkpoint or lookup table on a dataset split.
    Eval(EvalArgs),
    /// Times preprocessing and inference.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    samples: Option<usize>,
    /// Static clutter reflectors per scene.
    #[arg(long)]
    clutter: Option<usize>,
    /// Moving distractors per scene.
    #[arg(long)]
    distractors: Option<usize>,
    #[arg(long)]
    noise_power: Option<f64>,
    /// Feature kinds, e.g. `ra64,rv,rc`.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    #[arg(long)]
    clutter_removal: Option<bool>,
    /// Also stores the raw radar cubes (needed by `preprocess`).
    #[arg(long)]
    keep_raw: bool,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    kinds: Vec<String>,
    /// Defaults to the dataset's setting.
    #[arg(long)]
    clutter_removal: Option<bool>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for checkpoints and reports.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    topk: Option<Vec<usize>>,
    /// Training-set percentages, e.g. `10,25,50,100`.
    #[arg(long, value_delimiter = ',')]
    percents: Option<Vec<f64>>,
    /// Number of seeds, counted up from the base seed.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Network variants: ra64, ra4, rv, rc.
    #[arg(long, value_delimiter = ',')]
    variant: Option<Vec<String>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Angle FFT sizes of the range-angle maps the tables are built on.
    #[arg(long, value_delimiter = ',', default_value = "4,64")]
    angle_fft: Vec<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, conflicts_with = "lut", required_unless_present = "lut")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    lut: Option<PathBuf>,
    /// Angle FFT size of the maps the lookup table reads.
    #[arg(long, default_value_t = 64)]
    angle_fft: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    topk: Vec<usize>,
    /// `train`, `val`, `test` or `all`.
    #[arg(long, default_value = "test")]
    split: String,
    /// Optional directory for CSV/JSONL reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Every feature kind, network variant and lookup table.
    #[arg(long)]
    all: bool,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match with_threads(cli.threads, move || run(cli.command, exec)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command, exec: Exec) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, exec),
        Command::Preprocess(a) => preprocess(a, exec),
        Command::Train(a) => train(a, exec),
        Command::Baseline(a) => baseline(a, exec),
        Command::Eval(a) => eval(a, exec),
        Command::Bench(a) => bench(a),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            require_path(path)?;
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    Ok(config)
}

fn parse_kinds(names: &[String]) -> Result<Vec<FeatureKind>> {
    Ok(names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?)
}

fn parse_variants(names: &[String]) -> Result<Vec<Variant>> {
    Ok(names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn require_path(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} does not exist", path.display())))
    }
}

fn open_dataset(path: &Path) -> Result<Dataset> {
    require_path(path)?;
    Ok(read_dataset(path)?)
}

fn write_snapshot(dir: &Path, config: &RunConfig) -> Result<()> {
    let path = dir.join(SNAPSHOT);
    fs::write(&path, config.to_toml()?).map_err(io_err(&path))
}

fn simulate(a: SimulateArgs, exec: Exec) -> Result<()> {
    let mut config = load_config(&a.cfg)?;
    if let Some(n) = a.samples {
        config.samples = n;
    }
    if let Some(n) = a.clutter {
        config.scenario.clutter_count = n;
    }
    if let Some(n) = a.distractors {
        config.scenario.distractor_count = n;
    }
    if let Some(p) = a.noise_power {
        config.radar.noise_power = p;
    }
    if let Some(kinds) = &a.kinds {
        config.features.kinds = parse_kinds(kinds)?;
    }
    if let Some(cr) = a.clutter_removal {
        config.features.clutter_removal = cr;
    }
    config.keep_raw |= a.keep_raw;
    config.validate()?;

    let scenes = generate_scenes(&config)?;
    let pipeline = Pipeline::new(&config.radar, &config.comm, &config.features, config.keep_raw)?;
    let mut writer = DatasetWriter::create(&a.out, dataset_header(&config), &config.features.kinds, config.keep_raw)?;
    for chunk in scenes.chunks(SIM_CHUNK) {
        for sample in pipeline.process_all(chunk, exec)? {
            writer.push(&sample)?;
        }
    }
    let manifest = writer.finish()?;
    write_snapshot(&a.out, &config)?;
    let limits = derive_radar_limits(&config.radar).map_err(radarbeam::Error::from)?;
    println!(
        "wrote {} samples to {} (cube {:?}, {} beams, range resolution {:.3} m, max range {:.1} m, max speed {:.1} m/s)",
        manifest.samples,
        a.out.display(),
        manifest.cube_shape,
        manifest.n_beams,
        limits.range_resolution_m,
        limits.r_max_m,
        limits.v_max_mps,
    );
    Ok(())
}

fn preprocess(a: PreprocessArgs, exec: Exec) -> Result<()> {
    let kinds = parse_kinds(&a.kinds)?;
    let dataset = open_dataset(&a.dataset)?;
    if dataset.manifest.raw.is_none() {
        return Err(radarbeam::dataset::DatasetError::Schema(format!(
            "{} stores no raw cubes; simulate with --keep-raw",
            a.dataset.display()
        ))
        .into());
    }
    let clutter_removal = a.clutter_removal.unwrap_or(dataset.manifest.clutter_removal);
    let sizes: Vec<usize> = kinds
        .iter()
        .filter_map(|k| match k {
            FeatureKind::RangeAngle { angle_fft_size } => Some(*angle_fft_size),
            _ => None,
        })
        .collect();
    let pre = match &dataset.manifest.radar {
        Some(radar) => Preprocessor::for_config(radar),
        None => Preprocessor::new(dataset.manifest.cube_shape),
    }
    .with_angle_sizes(&sizes);
    for kind in kinds {
        let maps = exec.try_map_range(dataset.len(), |i| -> Result<Vec<f32>> {
            let frame = dataset.raw_cube(i)?;
            Ok(pre.compute(&frame, kind, clutter_removal)?.to_f32())
        })?;
        let set =
            FeatureSet { kind, shape: kind.shape(dataset.manifest.cube_shape), clutter_removal, data: maps.concat() };
        let written = add_features(&a.dataset, &set)?;
        println!("{kind}: {}", if written { "added" } else { "unchanged" });
    }
    Ok(())
}

fn apply_experiment_args(config: &mut RunConfig, a: &ExperimentArgs) {
    if let Some(ks) = &a.topk {
        config.eval.ks = ks.clone();
    }
    if let Some(p) = &a.percents {
        config.eval.percents = p.clone();
    }
    if let Some(n) = a.seeds {
        config.train.n_seeds = n;
    }
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    predictor: String,
    seed: u64,
    percent: f64,
    #[serde(flatten)]
    metrics: &'a EpochMetrics,
}

fn train(a: TrainArgs, exec: Exec) -> Result<()> {
    let mut config = load_config(&a.exp.cfg)?;
    apply_experiment_args(&mut config, &a.exp);
    if let Some(v) = &a.variant {
        config.eval.predictors = parse_variants(v)?.into_iter().map(Predictor::Cnn).collect();
    }
    if let Some(e) = a.epochs {
        config.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        config.train.lr = lr;
    }
    if let Some(b) = a.batch_size {
        config.train.batch_size = b;
    }
    config.validate()?;
    run_and_report(&config, &a.exp, exec)
}

fn baseline(a: BaselineArgs, exec: Exec) -> Result<()> {
    let mut config = load_config(&a.exp.cfg)?;
    apply_experiment_args(&mut config, &a.exp);
    config.eval.predictors = a.angle_fft.iter().map(|&m| Predictor::Lut(m)).collect();
    config.validate()?;
    run_and_report(&config, &a.exp, exec)
}

fn run_and_report(config: &RunConfig, a: &ExperimentArgs, exec: Exec) -> Result<()> {
    let dataset = open_dataset(&a.dataset)?;
    let split = dataset.split();
    let spec = ExperimentSpec {
        name: a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into()),
        predictors: config.eval.predictors.clone(),
        seeds: (0..config.train.n_seeds as u64).map(|i| config.train.seed + i).collect(),
        ks: config.eval.ks.clone(),
        percents: config.eval.percents.clone(),
        train: config.train.clone(),
        exec,
    };
    spec.validate()?;
    let models = a.out.join("models");
    fs::create_dir_all(&models).map_err(io_err(&models))?;
    write_snapshot(&a.out, config)?;
    let mut metrics = Vec::new();
    let report = run_experiment(&spec, &dataset, &split, |run: &RunResult| {
        let stem = format!("{}-p{}-s{}", run.predictor, run.percent, run.seed);
        if let Some(model) = &run.model {
            save_checkpoint(model, &models.join(format!("{stem}.ckpt")))?;
        }
        if let Some(lut) = &run.lut {
            lut.save(&models.join(format!("{stem}.lut")))?;
        }
        let accs: Vec<String> =
            spec.ks.iter().zip(&run.accuracies).map(|(k, acc)| format!("top-{k} {acc:.4}")).collect();
        println!("{} seed {} {}%: {}", run.predictor, run.seed, run.percent, accs.join(", "));
        for m in &run.metrics {
            metrics.push((run.predictor.to_string(), run.seed, run.percent, m.clone()));
        }
        Ok(())
    })?;
    let metric_rows: Vec<MetricsRow> = metrics
        .iter()
        .map(|(predictor, seed, percent, m)| MetricsRow {
            predictor: predictor.clone(),
            seed: *seed,
            percent: *percent,
            metrics: m,
        })
        .collect();
    if !metric_rows.is_empty() {
        write_jsonl(&metric_rows, &a.out.join("epochs.jsonl"))?;
    }
    write_reports(&a.out, &report)?;
    print_summary(&report);
    Ok(())
}

fn write_reports(dir: &Path, report: &EvalReport) -> Result<()> {
    write_csv(&report.rows, &dir.join("report.csv"))?;
    write_jsonl(&report.rows, &dir.join("report.jsonl"))?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
    fs::write(&path, text).map_err(io_err(&path))
}

fn print_summary(report: &EvalReport) {
    println!("{:<12} {:>8} {:>4} {:>9} {:>9}", "predictor", "percent", "k", "mean", "std");
    for row in report.rows.iter().filter(|r| r.seed == "mean") {
        println!(
            "{:<12} {:>8} {:>4} {:>9.4} {:>9.4}",
            row.predictor,
            row.percent,
            row.k,
            row.accuracy,
            row.std.unwrap_or(f64::NAN)
        );
    }
    for (name, rho) in &report.spearman {
        if let Some(rho) = rho {
            println!("{name}: Spearman(percent, top-1) = {rho:.3}");
        }
    }
    for (name, params) in &report.param_counts {
        println!("{name}: {params} parameters");
    }
}

fn split_indices(dataset: &Dataset, name: &str) -> Result<Vec<usize>> {
    let split: Split = dataset.split();
    Ok(match name {
        "train" => split.train,
        "val" => split.val,
        "test" => split.test,
        "all" => (0..dataset.len()).collect(),
        other => return Err(CliError::Usage(format!("unknown split `{other}` (train, val, test, all)"))),
    })
}

#[derive(Serialize)]
struct AccuracyRow {
    predictor: String,
    split: String,
    k: usize,
    accuracy: f64,
    n: usize,
}

fn eval(a: EvalArgs, exec: Exec) -> Result<()> {
    if a.topk.is_empty() || a.topk.contains(&0) {
        return Err(CliError::Usage("--topk needs positive values".into()));
    }
    let dataset = open_dataset(&a.dataset)?;
    let indices = split_indices(&dataset, &a.split)?;
    if indices.is_empty() {
        return Err(radarbeam::dataset::DatasetError::Schema(format!("split `{}` is empty", a.split)).into());
    }
    let labels = dataset.labels();
    let truth: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    let k_max = a.topk.iter().copied().max().unwrap_or(1);
    let (name, predictions) = if let Some(path) = &a.checkpoint {
        require_path(path)?;
        let model = load_checkpoint(path)?;
        let variant = model
            .variant
            .ok_or_else(|| CliError::Usage(format!("{} does not record its network variant", path.display())))?;
        let data = dataset_tensors(&dataset, variant.feature_kind(), &indices)?;
        let scores = predict_scores(&model, &data, exec)?;
        let k = k_max.min(model.n_outputs());
        (Predictor::Cnn(variant), scores.iter().map(|s| topk_indices(s, k)).collect::<Vec<_>>())
    } else {
        let path = a.lut.as_ref().expect("clap requires --checkpoint or --lut");
        require_path(path)?;
        let lut = LookupTable::load(path)?;
        let kind = FeatureKind::RangeAngle { angle_fft_size: a.angle_fft };
        let set = dataset
            .feature(kind)
            .ok_or_else(|| radarbeam::dataset::DatasetError::Schema(format!("dataset has no {kind} features")))?;
        let preds = exec.try_map_range(indices.len(), |j| lut.predict_values(set.sample(indices[j]), k_max))?;
        (Predictor::Lut(a.angle_fft), preds)
    };
    let accuracies = topk_accuracy(&predictions, &truth, &a.topk)?;
    let rows: Vec<AccuracyRow> = a
        .topk
        .iter()
        .zip(&accuracies)
        .map(|(&k, &accuracy)| AccuracyRow {
            predictor: name.to_string(),
            split: a.split.clone(),
            k,
            accuracy,
            n: truth.len(),
        })
        .collect();
    println!("{name} on {} ({} samples)", a.split, truth.len());
    println!("{:>4} {:>9}", "k", "accuracy");
    for row in &rows {
        println!("{:>4} {:>9.4}", row.k, row.accuracy);
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(io_err(out))?;
        write_csv(&rows, &out.join("eval.csv"))?;
        write_jsonl(&rows, &out.join("eval.jsonl"))?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut config = load_config(&a.cfg)?;
    if let Some(n) = a.iterations {
        config.eval.bench_iterations = n;
    }
    if let Some(n) = a.warmup {
        config.eval.bench_warmup = n;
    }
    let defaults = BenchSpec::default();
    let mut spec = BenchSpec {
        warmup: config.eval.bench_warmup,
        iterations: config.eval.bench_iterations,
        kinds: config.features.kinds.clone(),
        variants: config
            .eval
            .predictors
            .iter()
            .filter_map(|p| if let Predictor::Cnn(v) = p { Some(*v) } else { None })
            .collect(),
        luts: config
            .eval
            .predictors
            .iter()
            .filter_map(|p| if let Predictor::Lut(m) = p { Some(*m) } else { None })
            .collect(),
        radar: config.radar.clone(),
        clutter_removal: config.features.clutter_removal,
        seed: config.seed,
    };
    if a.all {
        spec.kinds = defaults.kinds;
        spec.variants = defaults.variants;
        spec.luts = defaults.luts;
        config.features.kinds = spec.kinds.clone();
        config.eval.predictors = spec
            .variants
            .iter()
            .map(|&v| Predictor::Cnn(v))
            .chain(spec.luts.iter().map(|&m| Predictor::Lut(m)))
            .collect();
    }
    if let Some(k) = &a.kinds {
        spec.kinds = parse_kinds(k)?;
        config.features.kinds = spec.kinds.clone();
    }
    if let Some(v) = &a.variants {
        spec.variants = parse_variants(v)?;
        config.eval.predictors = spec
            .variants
            .iter()
            .map(|&v| Predictor::Cnn(v))
            .chain(spec.luts.iter().map(|&m| Predictor::Lut(m)))
            .collect();
    }
    config.radar.validate().map_err(radarbeam::Error::from)?;
    let rows: Vec<TimingRow> = benchmark(&spec)?;
    println!(
        "{:<11} {:<6} {:>12} {:>12} {:>10} {:>10} {:>12}",
        "stage", "name", "median_us", "p90_us", "input", "params", "flops"
    );
    for r in &rows {
        let params = r.param_count.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let flops = r.flop_estimate.map(|f| format!("{f:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<11} {:<6} {:>12.1} {:>12.1} {:>10} {:>10} {:>12}",
            r.stage, r.name, r.median_us, r.p90_us, r.input_size, params, flops
        );
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(io_err(out))?;
        write_csv(&rows, &out.join("bench.csv"))?;
        write_jsonl(&rows, &out.join("bench.jsonl"))?;
        write_snapshot(out, &config)?;
    }
    Ok(())
}
