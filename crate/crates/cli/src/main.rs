mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alldiff_select::csp::{generate_instance, Family};
use alldiff_select::eval::{baselines, evaluate, format_table, instances_csv, oracle_choice, EvalInstance, PenaltyRow};
use alldiff_select::features::{extract_features, FeatureSet};
use alldiff_select::harness::{benchmark, label_matrix, HarnessError, Label, RuntimeMatrix};
use alldiff_select::learners::{train_ensemble, Algorithm, Dataset, EnsembleModel, LabeledExample};
use alldiff_select::solver::{CostMode, SearchLimits};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use artifacts::{FeatureRecord, LabelData, MatrixData, Selection};
use config::{require, PipelineConfig, Snapshot};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Schema { path: PathBuf, msg: String },
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Schema { .. } | CliError::Input(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "alldiff-select",
    version,
    about = "Pick an alldifferent propagator per instance"
)]
struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for extract and bench.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_parser = parse_cost_mode)]
    cost_mode: Option<CostMode>,
    #[command(subcommand)]
    command: Command,
}

fn parse_cost_mode(s: &str) -> Result<CostMode, String> {
    match s {
        "wallclock" => Ok(CostMode::Wallclock),
        "deterministic" => Ok(CostMode::Deterministic),
        _ => Err(format!("unknown cost mode `{s}` (expected wallclock or deterministic)")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write generated instances to a directory.
    Generate(GenerateArgs),
    /// Compute instance features.
    Extract(ExtractArgs),
    /// Run all nine variants on every instance.
    Bench(BenchArgs),
    /// Label instances from a runtime matrix.
    Label(LabelArgs),
    /// Train the voting ensemble.
    Train(TrainArgs),
    /// Print the chosen variant for each instance.
    Select(SelectArgs),
    /// Report misclassification penalties against baselines.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    feature_set: Option<FeatureSet>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LabelArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    feature_set: Option<FeatureSet>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on the raw dataset without cost-based duplication.
    #[arg(long)]
    no_duplicate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Evaluate the oracle instead of a trained model.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    random_seed: Option<u64>,
    /// Text report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance CSV for the evaluated selector.
    #[arg(long)]
    instances_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if cli.cost_mode.is_some() {
        cfg.cost_mode = cli.cost_mode;
    }
    if cfg.jobs == Some(0) {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Generate(a) => cmd_generate(a, cfg),
        Command::Extract(a) => cmd_extract(a, cfg),
        Command::Bench(a) => cmd_bench(a, cfg),
        Command::Label(a) => cmd_label(a, cfg),
        Command::Train(a) => cmd_train(a, cfg),
        Command::Select(a) => cmd_select(a, cfg),
        Command::Evaluate(a) => cmd_evaluate(a, cfg),
    }
}

fn override_with<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn cmd_generate(a: GenerateArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.corpus, a.out);
    let dir = require(cfg.corpus, "output directory")?;
    for seed in a.seed..a.seed.saturating_add(a.count) {
        let inst = generate_instance(a.family, a.size, seed).map_err(|e| CliError::Input(e.to_string()))?;
        let text = artifacts::instance_file_text(
            &inst,
            &format!("generated family={} size={} seed={seed}", a.family, a.size),
        );
        artifacts::write_text(&dir.join(format!("{}.{}", inst.name(), artifacts::INSTANCE_EXT)), &text)?;
    }
    println!("wrote {} instances to {}", a.count, dir.display());
    Ok(())
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_extract(a: ExtractArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.corpus, a.corpus);
    override_with(&mut cfg.features, a.out);
    override_with(&mut cfg.feature_set, a.feature_set);
    override_with(&mut cfg.sampling_seed, a.seed);
    let snap = cfg.snapshot();
    let corpus = artifacts::read_corpus(&require(cfg.corpus.clone(), "corpus")?)?;
    let out = require(cfg.features.clone(), "features output")?;
    let records: Vec<FeatureRecord> = pool(cfg.jobs)?.install(|| {
        corpus
            .par_iter()
            .map(|inst| {
                let ex = extract_features(inst, snap.feature_set, snap.sampling_seed);
                FeatureRecord {
                    instance: inst.name().to_string(),
                    features: ex.features,
                    extraction_seconds: match snap.cost_mode {
                        CostMode::Wallclock => ex.elapsed.as_secs_f64(),
                        CostMode::Deterministic => 0.0,
                    },
                }
            })
            .collect()
    });
    artifacts::write_artifact(&out, "features", &snap, &records)?;
    let mean = records.iter().map(|r| r.extraction_seconds).sum::<f64>() / records.len() as f64;
    for r in &records {
        println!("{}\t{:.6}", r.instance, r.extraction_seconds);
    }
    println!("extracted {} instances, mean {:.6} s per instance", records.len(), mean);
    Ok(())
}

fn cmd_bench(a: BenchArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.corpus, a.corpus);
    override_with(&mut cfg.matrix, a.out);
    override_with(&mut cfg.time_limit, a.time_limit);
    override_with(&mut cfg.runs_per_cell, a.runs);
    let snap = cfg.snapshot();
    let corpus = artifacts::read_corpus(&require(cfg.corpus.clone(), "corpus")?)?;
    let out = require(cfg.matrix.clone(), "matrix output")?;
    let limits = SearchLimits {
        time_limit: snap.time_limit,
        node_limit: None,
        cost_mode: snap.cost_mode,
    };
    let matrix = benchmark(&corpus, &limits, snap.runs_per_cell, cfg.jobs).map_err(|e| match e {
        HarnessError::Pool(_) | HarnessError::MissingCell { .. } => CliError::Internal(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;
    artifacts::write_artifact(&out, "matrix", &snap, &MatrixData::from_matrix(&matrix))?;
    println!("benchmarked {} instances x 9 variants", matrix.instances().len());
    Ok(())
}

fn read_matrix(path: &Path) -> Result<RuntimeMatrix, CliError> {
    let (_, data): (_, MatrixData) = artifacts::read_artifact(path, "matrix")?;
    data.into_matrix(path)
}

fn cmd_label(a: LabelArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.matrix, a.matrix);
    override_with(&mut cfg.labels, a.out);
    let matrix_path = require(cfg.matrix.clone(), "matrix")?;
    let (snap, data): (Snapshot, MatrixData) = artifacts::read_artifact(&matrix_path, "matrix")?;
    let matrix = data.into_matrix(&matrix_path)?;
    let labels = label_matrix(&matrix);
    artifacts::write_artifact(&require(cfg.labels, "labels output")?, "labels", &snap, &labels)?;
    for l in &labels {
        println!("{}\t{}\t{}", l.instance, l.label, l.cost);
    }
    Ok(())
}

fn read_features(path: &Path) -> Result<(Snapshot, Vec<FeatureRecord>), CliError> {
    artifacts::read_artifact(path, "features")
}

fn cmd_train(a: TrainArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.features, a.features);
    override_with(&mut cfg.labels, a.labels);
    override_with(&mut cfg.model, a.out);
    override_with(&mut cfg.folds, a.folds);
    override_with(&mut cfg.fold_seed, a.seed);
    if a.no_duplicate {
        cfg.duplicate = Some(false);
    }
    let features_path = require(cfg.features.clone(), "features")?;
    let (fsnap, records) = read_features(&features_path)?;
    if cfg.feature_set.is_none() && a.feature_set.is_none() {
        cfg.feature_set = Some(fsnap.feature_set);
    }
    override_with(&mut cfg.feature_set, a.feature_set);
    let (_, labels): (_, LabelData) = artifacts::read_artifact(&require(cfg.labels.clone(), "labels")?, "labels")?;
    let snap = cfg.snapshot();

    let mut examples = Vec::new();
    for l in labels {
        let Label::Best(variant) = l.label else { continue };
        let rec = records
            .iter()
            .find(|r| r.instance == l.instance)
            .ok_or_else(|| CliError::Input(format!("no features for labelled instance `{}`", l.instance)))?;
        examples.push(LabeledExample {
            name: l.instance,
            features: rec.features.clone(),
            label: variant,
            cost: l.cost,
        });
    }
    let model = train_ensemble(
        &Dataset::new(examples),
        snap.folds,
        snap.fold_seed,
        snap.feature_set,
        snap.duplicate,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    artifacts::write_artifact(&require(cfg.model, "model output")?, "model", &snap, &model)?;
    println!(
        "trained {} + {} models over {} folds",
        model.level1.len(),
        model.level2.len(),
        model.folds
    );
    Ok(())
}

fn cmd_select(a: SelectArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.model, a.model);
    override_with(&mut cfg.features, a.features);
    let (snap, model): (Snapshot, EnsembleModel) = artifacts::read_artifact(&require(cfg.model, "model")?, "model")?;
    let (_, records) = read_features(&require(cfg.features, "features")?)?;
    let mut out = Vec::with_capacity(records.len());
    for r in &records {
        let variant = model
            .select_variant(&r.features)
            .map_err(|e| CliError::Input(format!("{}: {e}", r.instance)))?;
        println!("{}\t{variant}", r.instance);
        out.push(Selection {
            instance: r.instance.clone(),
            variant,
        });
    }
    if let Some(path) = a.out {
        artifacts::write_artifact(&path, "selections", &snap, &out)?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    override_with(&mut cfg.model, a.model);
    override_with(&mut cfg.features, a.features);
    override_with(&mut cfg.matrix, a.matrix);
    override_with(&mut cfg.report, a.out);
    override_with(&mut cfg.random_seed, a.random_seed);
    let (_, records) = read_features(&require(cfg.features.clone(), "features")?)?;
    let matrix = read_matrix(&require(cfg.matrix.clone(), "matrix")?)?;
    let wallclock = matrix.protocol.cost_mode() == CostMode::Wallclock;
    cfg.cost_mode = Some(matrix.protocol.cost_mode());
    cfg.time_limit = Some(matrix.protocol.time_limit());
    cfg.runs_per_cell = Some(matrix.protocol.runs_per_cell);
    let model: Option<EnsembleModel> = if a.oracle {
        None
    } else {
        let (msnap, m): (Snapshot, EnsembleModel) =
            artifacts::read_artifact(&require(cfg.model.clone(), "model")?, "model")?;
        cfg.feature_set = Some(msnap.feature_set);
        cfg.folds = Some(msnap.folds);
        cfg.fold_seed = Some(msnap.fold_seed);
        cfg.duplicate = Some(msnap.duplicate);
        Some(m)
    };
    let snap = cfg.snapshot();

    let instances: Vec<EvalInstance> = records
        .into_iter()
        .map(|r| EvalInstance {
            name: r.instance,
            features: r.features,
            feature_time: r.extraction_seconds,
        })
        .collect();
    let names: Vec<String> = instances.iter().map(|i| i.name.clone()).collect();
    let input = |e: alldiff_select::eval::EvalError| CliError::Input(e.to_string());

    let mut rows: Vec<PenaltyRow> = Vec::new();
    let primary = match &model {
        None => {
            let limit = matrix.protocol.time_limit();
            evaluate("oracle selector", &instances, &matrix, false, |i| {
                oracle_choice(matrix.cells_for(&i.name).expect("checked by evaluate"), limit)
            })
            .map_err(input)?
        }
        Some(m) => {
            for i in &instances {
                m.select_variant(&i.features)
                    .map_err(|e| CliError::Input(format!("{}: {e}", i.name)))?;
            }
            evaluate("meta-classifier", &instances, &matrix, wallclock, |i| {
                m.select_variant(&i.features).expect("features checked above")
            })
            .map_err(input)?
        }
    };
    rows.push(primary.clone());
    if let Some(m) = &model {
        let mut individual = Vec::new();
        for alg in Algorithm::ALL {
            let row = evaluate(&format!("{alg}"), &instances, &matrix, false, |i| {
                m.select_with(alg, &i.features).expect("features checked above")
            })
            .map_err(input)?;
            individual.push(row);
        }
        let best = individual.iter().min_by(|a, b| a.total.total_cmp(&b.total)).cloned();
        let worst = individual.iter().max_by(|a, b| a.total.total_cmp(&b.total)).cloned();
        if let (Some(mut b), Some(mut w)) = (best, worst) {
            b.name = format!("best individual ({})", b.name);
            w.name = format!("worst individual ({})", w.name);
            rows.push(b);
            rows.push(w);
        }
    }
    rows.extend(baselines(&matrix, &names, snap.random_seed).map_err(input)?);

    let table = format_table("total misclassification penalty", &rows);
    print!("{table}");
    if let Some(path) = &cfg.report {
        let text = artifacts::comment_header("report", &snap)? + &table;
        artifacts::write_text(path, &text)?;
    }
    if let Some(path) = &a.instances_out {
        let csv = instances_csv(&primary).map_err(|e| CliError::Internal(e.to_string()))?;
        artifacts::write_text(path, &(artifacts::comment_header("instances", &snap)? + &csv))?;
    }
    Ok(())
}
