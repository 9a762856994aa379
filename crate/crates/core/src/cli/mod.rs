// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Every subcommand reads plain-text artifacts and
//! writes new ones atomically; `pipeline` chains them and records a manifest.

mod pipeline;

use std::ffi::OsString;
use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::design::{
    generate_design, parse_design, parse_generator_config, serialize_design, validate_design, DesignError,
    GeneratorConfig, Violation, ViolationCode,
};
use crate::eval::{
    compare_models, constant_rows, evaluate, predict_rows, render_text, split_dataset, ClassReport, ClassSplit,
    EvalError, PredictionRow, Table1Report,
};
use crate::features::{build_dataset, read_dataset, write_dataset, DatasetClass, DatasetHeader, DatasetRow, FeatureError};
use crate::ml::{
    train, Hyperparameters, MlError, ModelKind, ModelSpec, Target, TrainedModel,
};
use crate::solver::{analyze, GoldenFile, SolveError};

pub use pipeline::{Manifest, ManifestStep};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("IO_ERROR: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("INVALID_DESIGN: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("GOLDEN_MISMATCH: {0}")]
    GoldenMismatch(String),
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IO_ERROR",
            CliError::Design(e) => e.code(),
            CliError::Invalid(v) => v.first().map_or("INVALID_DESIGN", |x| x.code.as_str()),
            CliError::Solve(e) => e.code(),
            CliError::Feature(e) => e.code(),
            CliError::Ml(e) => e.code(),
            CliError::Eval(e) => e.code(),
            CliError::GoldenMismatch(_) => "GOLDEN_MISMATCH",
            CliError::Parse(_) => "PARSE_ERROR",
            CliError::Usage(_) => "USAGE",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fastpi", version, about = "Window-level IR-drop and EM hotspot classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic design from a generator config.
    Generate(GenerateArgs),
    /// Run the DC sign-off solve and write the golden violations.
    Solve(SolveArgs),
    /// Tile windows, extract features and write the two labelled datasets.
    Extract(ExtractArgs),
    /// Stratified train/test split of one dataset.
    Split(SplitArgs),
    /// Train one classifier for one target.
    Train(TrainArgs),
    /// Apply trained models to a dataset.
    Predict(PredictArgs),
    /// Score predictions against labels and write the comparison table.
    Evaluate(EvaluateArgs),
    /// Train and rank all three model kinds on an extract directory.
    Compare(CompareArgs),
    /// generate, solve, extract, split, train, predict and evaluate in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator config file; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub design: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Include every node voltage in the golden file.
    #[arg(long)]
    pub dump_voltages: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub design: PathBuf,
    pub golden: PathBuf,
    /// Directory for continuous.jsonl and discontinuous.jsonl.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct HyperparameterFlags {
    /// knn: neighbour count.
    #[arg(long)]
    pub k: Option<usize>,
    /// forest: number of trees.
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// forest: depth limit (0 = unlimited).
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// forest: candidate features per split (default floor(sqrt(d))).
    #[arg(long)]
    pub max_features: Option<usize>,
    /// forest: grow every tree on the full training set.
    #[arg(long)]
    pub no_bootstrap: bool,
    /// mlp: hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// mlp: Adam step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// mlp: minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// mlp: passes over the training set.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// mlp: multiplier on the balancing weight of positive rows.
    #[arg(long)]
    pub positive_weight_scale: Option<f64>,
}

impl HyperparameterFlags {
    fn apply(&self, kind: ModelKind) -> Result<Hyperparameters, CliError> {
        let foreign = |flag: &str, owner: ModelKind| {
            Err(CliError::Usage(format!("--{flag} applies to {owner} models, not {kind}")))
        };
        let mut h = Hyperparameters::default_for(kind);
        let knn_flags = [("k", self.k.is_some())];
        let forest_flags = [
            ("n-trees", self.n_trees.is_some()),
            ("max-depth", self.max_depth.is_some()),
            ("max-features", self.max_features.is_some()),
            ("no-bootstrap", self.no_bootstrap),
        ];
        let mlp_flags = [
            ("hidden", self.hidden.is_some()),
            ("learning-rate", self.learning_rate.is_some()),
            ("batch-size", self.batch_size.is_some()),
            ("epochs", self.epochs.is_some()),
            ("positive-weight-scale", self.positive_weight_scale.is_some()),
        ];
        for (owner, flags) in [
            (ModelKind::Knn, &knn_flags[..]),
            (ModelKind::Forest, &forest_flags[..]),
            (ModelKind::Mlp, &mlp_flags[..]),
        ] {
            if owner != kind {
                if let Some((flag, _)) = flags.iter().find(|(_, set)| *set) {
                    return foreign(flag, owner);
                }
            }
        }
        match &mut h {
            Hyperparameters::Knn(p) => {
                if let Some(k) = self.k {
                    p.k = k;
                }
            }
            Hyperparameters::Forest(p) => {
                if let Some(n) = self.n_trees {
                    p.n_trees = n;
                }
                if let Some(d) = self.max_depth {
                    p.max_depth = (d > 0).then_some(d);
                }
                if let Some(m) = self.max_features {
                    p.max_features = Some(m);
                }
                if self.no_bootstrap {
                    p.bootstrap = false;
                }
            }
            Hyperparameters::Mlp(p) => {
                if let Some(v) = self.hidden {
                    p.hidden = v;
                }
                if let Some(v) = self.learning_rate {
                    p.learning_rate = v;
                }
                if let Some(v) = self.batch_size {
                    p.batch_size = v;
                }
                if let Some(v) = self.epochs {
                    p.epochs = v;
                }
                if let Some(v) = self.positive_weight_scale {
                    p.positive_weight_scale = v;
                }
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub kind: ModelKind,
    #[arg(long)]
    pub target: Target,
    #[arg(long)]
    pub seed: u64,
    /// Window class the model is for; defaults to the dataset header's.
    #[arg(long)]
    pub window_class: Option<DatasetClass>,
    #[command(flatten)]
    pub hyper: HyperparameterFlags,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// One or more model files followed by the dataset.
    #[arg(required = true, num_args = 1.., value_name = "MODEL... DATA")]
    pub inputs: Vec<PathBuf>,
    /// Predict LABEL for every row of TARGET without a model, as `ir=0`.
    #[arg(long, value_name = "TARGET=LABEL")]
    pub constant: Vec<String>,
    /// Model kind recorded on constant predictions.
    #[arg(long, default_value = "knn")]
    pub constant_kind: ModelKind,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Pairs of prediction file and dataset file, one pair per window class.
    #[arg(required = true, num_args = 2.., value_name = "PRED DATA")]
    pub inputs: Vec<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Also print the table and write it next to the report with a .txt extension.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory holding continuous.jsonl and discontinuous.jsonl.
    pub dir: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Seed of the train/test split; defaults to the first training seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fastpi: error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Pipeline(a) => pipeline::cmd_pipeline(&a),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial artifact.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn log(msg: impl std::fmt::Display) {
    eprintln!("fastpi: {msg}");
}

pub(crate) fn load_generator_config(path: Option<&Path>) -> Result<GeneratorConfig, CliError> {
    match path {
        Some(p) => Ok(parse_generator_config(&read_text(p)?)?),
        None => Ok(GeneratorConfig::default()),
    }
}

fn valid_or_err(violations: Vec<Violation>) -> Result<(), CliError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(violations))
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let cfg = load_generator_config(a.config.as_deref())?;
    let design = generate_design(&cfg, a.seed)?;
    valid_or_err(validate_design(&design))?;
    write_atomic(&a.output, &serialize_design(&design))?;
    log(format_args!("wrote {} ({} cells)", a.output.display(), design.cells.len()));
    Ok(())
}

pub(crate) fn load_design(path: &Path) -> Result<crate::design::Design, CliError> {
    Ok(parse_design(&read_text(path)?)?)
}

/// The bump-matrix checks only matter for feature extraction; the solver
/// reports missing supplies itself.
fn solvable(violations: Vec<Violation>) -> Result<(), CliError> {
    let (warn, fatal): (Vec<_>, Vec<_>) = violations
        .into_iter()
        .partition(|v| matches!(v.code, ViolationCode::NineBumpContainment | ViolationCode::C4Padding));
    for v in &warn {
        log(format_args!("warning: {v}"));
    }
    valid_or_err(fatal)
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let design = load_design(&a.design)?;
    solvable(validate_design(&design))?;
    let analysis = analyze(&design)?;
    let golden = analysis.golden(&design, a.dump_voltages);
    write_atomic(&a.output, &golden.to_json())?;
    log(format_args!(
        "wrote {} (max drop {:.4} V, {} IR and {} EM violations)",
        a.output.display(),
        golden.metadata.max_ir_drop,
        golden.ir.len(),
        golden.em.len()
    ));
    Ok(())
}

pub(crate) fn check_golden(design: &crate::design::Design, golden: &GoldenFile) -> Result<(), CliError> {
    if golden.cell_ir_drop.len() != design.cells.len()
        || design.cells.iter().any(|c| !golden.cell_ir_drop.contains_key(&c.id))
    {
        return Err(CliError::GoldenMismatch("golden file does not cover this design's cells".into()));
    }
    Ok(())
}

pub(crate) fn dataset_path(dir: &Path, class: DatasetClass) -> PathBuf {
    dir.join(format!("{class}.jsonl"))
}

fn cmd_extract(a: &ExtractArgs) -> Result<(), CliError> {
    let design = load_design(&a.design)?;
    valid_or_err(validate_design(&design))?;
    let golden = GoldenFile::parse(&read_text(&a.golden)?)?;
    check_golden(&design, &golden)?;
    let sets = build_dataset(&design, &golden.violations())?;
    for class in DatasetClass::ALL {
        let (header, rows) = sets.get(class);
        let path = dataset_path(&a.output, class);
        write_atomic(&path, &write_dataset(header, rows))?;
        log(format_args!("wrote {} ({} rows)", path.display(), rows.len()));
    }
    Ok(())
}

pub(crate) fn load_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetRow>), CliError> {
    Ok(read_dataset(&read_text(path)?)?)
}

fn cmd_split(a: &SplitArgs) -> Result<(), CliError> {
    let (header, rows) = load_dataset(&a.data)?;
    let (train_rows, test_rows) = split_dataset(&rows, a.test_fraction, a.seed)?;
    write_atomic(&a.train, &write_dataset(&header, &train_rows))?;
    write_atomic(&a.test, &write_dataset(&header, &test_rows))?;
    log(format_args!("split {} rows into {} train and {} test", rows.len(), train_rows.len(), test_rows.len()));
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let (header, rows) = load_dataset(&a.data)?;
    let mut spec = ModelSpec::new(a.kind, a.target, a.window_class.unwrap_or(header.window_class), a.seed);
    spec.hyperparameters = a.hyper.apply(a.kind)?;
    let model = train(&spec, &rows)?;
    write_atomic(&a.output, &model.save())?;
    log(format_args!("wrote {} ({} {} model, {} rows)", a.output.display(), a.kind, a.target, rows.len()));
    Ok(())
}

fn parse_constant(s: &str) -> Result<(Target, u8), CliError> {
    let bad = || CliError::Usage(format!("--constant expects TARGET=LABEL with LABEL 0 or 1, got `{s}`"));
    let (t, l) = s.split_once('=').ok_or_else(bad)?;
    let target: Target = t.parse().map_err(|_| bad())?;
    let label = match l {
        "0" => 0,
        "1" => 1,
        _ => return Err(bad()),
    };
    Ok((target, label))
}

pub(crate) fn predictions_jsonl(preds: &[PredictionRow]) -> String {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

/// Model predictions followed by constant ones, rejecting a second source
/// for the same target.
pub(crate) fn predict_all(
    models: &[TrainedModel],
    constants: &[(Target, u8)],
    constant_kind: ModelKind,
    rows: &[DatasetRow],
) -> Result<Vec<PredictionRow>, CliError> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for m in models {
        let t = m.spec.target;
        if seen.contains(&t) {
            return Err(CliError::Usage(format!("more than one prediction source for target {t}")));
        }
        seen.push(t);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.dataset_class() != m.spec.window_class) {
            return Err(MlError::WindowClassMismatch { expected: m.spec.window_class, found: r.dataset_class(), row: i }
                .into());
        }
        out.extend(predict_rows(m, rows)?);
    }
    for &(t, label) in constants {
        if seen.contains(&t) {
            return Err(CliError::Usage(format!("more than one prediction source for target {t}")));
        }
        seen.push(t);
        out.extend(constant_rows(rows, t, constant_kind, label));
    }
    Ok(out)
}

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let (data, model_paths) = a.inputs.split_last().expect("clap requires one input");
    if model_paths.is_empty() && a.constant.is_empty() {
        return Err(CliError::Usage("predict needs at least one MODEL (or --constant) before DATA".into()));
    }
    let constants = a.constant.iter().map(|s| parse_constant(s)).collect::<Result<Vec<_>, _>>()?;
    let models = model_paths
        .iter()
        .map(|p| Ok(TrainedModel::load(&read_text(p)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let (_, rows) = load_dataset(data)?;
    let preds = predict_all(&models, &constants, a.constant_kind, &rows)?;
    write_atomic(&a.output, &predictions_jsonl(&preds))?;
    log(format_args!("wrote {} ({} predictions)", a.output.display(), preds.len()));
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, CliError> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Parse(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Scores one class and notes targets the held-out set cannot score.
pub(crate) fn evaluate_class(
    preds: &[PredictionRow],
    header: &DatasetHeader,
    rows: &[DatasetRow],
) -> Result<ClassReport, CliError> {
    let mut report = evaluate(preds, rows, header.window_class)?;
    for (target, signoff) in [(Target::Ir, report.signoff_ir), (Target::Em, report.signoff_em)] {
        if signoff == 0 {
            report.notes.push(format!("DEGENERATE: no sign-off {target} violations in this set"));
        }
    }
    Ok(report)
}

pub(crate) fn use_color() -> bool {
    std::env::var_os("NO_COLOR").map_or(true, |v| v.is_empty()) && std::io::stdout().is_terminal()
}

pub(crate) fn text_path(report: &Path) -> PathBuf {
    report.with_extension("txt")
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    if a.inputs.len() % 2 != 0 {
        return Err(CliError::Usage("evaluate expects PRED DATA pairs".into()));
    }
    let mut classes = Vec::new();
    for pair in a.inputs.chunks(2) {
        let preds = read_predictions(&pair[0])?;
        let (header, rows) = load_dataset(&pair[1])?;
        let report = evaluate_class(&preds, &header, &rows)?;
        if classes.iter().any(|c: &ClassReport| c.window_class == report.window_class) {
            return Err(CliError::Usage(format!("{} windows given twice", report.window_class)));
        }
        classes.push(report);
    }
    let report = Table1Report::new(classes);
    write_atomic(&a.output, &report.to_json())?;
    if a.text {
        let path = text_path(&a.output);
        write_atomic(&path, &render_text(&report, false))?;
        print!("{}", render_text(&report, use_color()));
    }
    log(format_args!("wrote {}", a.output.display()));
    Ok(())
}

pub(crate) fn default_menu() -> Vec<Hyperparameters> {
    ModelKind::ALL.iter().map(|&k| Hyperparameters::default_for(k)).collect()
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let split_seed = a.split_seed.unwrap_or(a.seeds[0]);
    let mut parts = Vec::new();
    for class in DatasetClass::ALL {
        let (_, rows) = load_dataset(&dataset_path(&a.dir, class))?;
        parts.push((class, split_dataset(&rows, a.test_fraction, split_seed)?));
    }
    let splits: Vec<ClassSplit> = parts
        .iter()
        .map(|(c, (tr, te))| ClassSplit { window_class: *c, train: tr, test: te })
        .collect();
    let report = compare_models(&splits, &default_menu(), &a.seeds)?;
    write_atomic(&a.output, &report.to_json())?;
    log(format_args!("wrote {}", a.output.display()));
    Ok(())
}
