//! Command-line front end.
//!
//! Every command reports failures as a single JSON line on stderr of the form
//! `{"error":"data","code":3,"message":"..."}` and exits with that code.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mmlmix_core::baselines::score_report;
use mmlmix_core::evaluation::{compare_models, f_measure, mutual_information, null_model_bits, NullModel};
use mmlmix_core::mixture::{mixture_msglen, EmConfig, EmMode, Family, MixtureModel};
use mmlmix_core::search::{fit_fixed_m, infer_mixture_with, SearchConfig, SearchStrategy};
use mmlmix_core::{DataSet, Error};

use crate::experiments::{
    bivariate_pair, run_kappa_benchmark, run_recovery_study, simulate, ten_variate_pair, three_bars, vmf_family,
    write_table, KappaBenchmarkSpec, RecoverySpec, DEFAULT_KL_SAMPLES,
};
use crate::io::{
    load_model, parse_rows, read_dataset, save_model, write_json, write_jsonl, write_rows, BreakdownJson, IoError,
    ModelJson, RoundJson, RowFormat,
};
use crate::parallel::{available_threads, Threaded};
use crate::protein;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "MMLMIX_SEED";

#[derive(Debug, Parser)]
#[command(name = "mmlmix", version, about = "MML mixture estimation and model selection for Gaussian and vMF data")]
pub struct Cli {
    /// Worker threads for candidate evaluation and experiment trials.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture with a fixed number of components.
    Fit(FitArgs),
    /// Infer the number of components and the mixture.
    Search(SearchArgs),
    /// Draw a sample from a preset or saved mixture.
    Simulate(SimulateArgs),
    /// Run a simulation study and write its tables.
    Benchmark(BenchmarkArgs),
    /// Score saved models on a data set.
    Compare(CompareArgs),
    /// Clustering and null-model metrics.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Vmf,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Vmf => Family::Vmf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mml,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Mml,
    Fj,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Headerless CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Project rows onto the unit sphere (vMF).
    #[arg(long, conflicts_with = "angles")]
    pub normalize: bool,
    /// Rows are (θ, φ) in degrees, converted to unit vectors in three dimensions.
    #[arg(long)]
    pub angles: bool,
    /// Measurement precision of every coordinate.
    #[arg(long, default_value_t = mmlmix_core::data::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

impl DataArgs {
    fn format(&self) -> RowFormat {
        match (self.family, self.normalize, self.angles) {
            (_, _, true) => RowFormat::Angles,
            (_, true, _) => RowFormat::Normalize,
            (FamilyArg::Vmf, _, _) => RowFormat::Unit,
            (FamilyArg::Gaussian, _, _) => RowFormat::Raw,
        }
    }

    fn load(&self) -> Result<DataSet, CliError> {
        if self.family == FamilyArg::Gaussian && (self.normalize || self.angles) {
            return Err(CliError::usage("--normalize and --angles apply to vmf data only"));
        }
        let data = read_dataset(&self.input, self.format()).map_err(at(&self.input))?;
        Ok(data.with_epsilon(self.epsilon)?)
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Relative improvement below which EM stops.
    #[arg(long, default_value_t = mmlmix_core::mixture::DEFAULT_EM_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = mmlmix_core::mixture::DEFAULT_EM_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Number of components.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Mml)]
    pub mode: ModeArg,
    /// Independent EM starts; the shortest message wins.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Where to write the model JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Where to write the message-length breakdown (defaults next to the model).
    #[arg(long)]
    pub breakdown: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Mml)]
    pub strategy: StrategyArg,
    /// Relative message-length gain a perturbation must achieve to be accepted.
    #[arg(long, default_value_t = mmlmix_core::search::DEFAULT_MIN_IMPROVEMENT)]
    pub min_improvement: f64,
    /// Starting component count of the annihilation search.
    #[arg(long, default_value_t = mmlmix_core::search::DEFAULT_FJ_INITIAL_M)]
    pub initial_m: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub breakdown: Option<PathBuf>,
    /// Per-round search trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Five-component vMF mixture over (θ, φ), written in degrees.
    Protein,
    /// Two bivariate Gaussians separated by `--delta`.
    Bivariate,
    /// Two 10-variate Gaussians separated by `--delta`.
    SmallSample,
    /// Three parallel elongated Gaussians.
    ThreeBars,
    /// Two vMF components in three dimensions, 20° apart, κ = 10 and 100.
    VmfSeparated,
    /// Two vMF components in ten dimensions sharing a mean, κ = 10 and 100.
    VmfSharedMean,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "model", required_unless_present = "model")]
    pub preset: Option<Preset>,
    /// Saved model to sample from instead of a preset.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    #[arg(long)]
    pub output: PathBuf,
    /// Generating component of each row, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Kappa,
    Bivariate,
    SmallSample,
    VmfSeparated,
    VmfSharedMean,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Use the full trial counts instead of the desk-scale ones.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo samples per KL estimate in recovery studies.
    #[arg(long, default_value_t = DEFAULT_KL_SAMPLES)]
    pub kl_samples: usize,
    #[arg(long, default_value_t = mmlmix_core::search::DEFAULT_MIN_IMPROVEMENT)]
    pub min_improvement: f64,
    /// Directory receiving the CSV and TSV tables.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Saved models to score; two are required with `--truth`.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Generating model; adds message-length differences and KL divergences.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_KL_SAMPLES)]
    pub kl_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub metric: Metric,
}

#[derive(Debug, Subcommand)]
pub enum Metric {
    /// Mutual information (nats) between assignments and true classes.
    Mi(LabelArgs),
    /// F-measure of assignments against true classes.
    FMeasure(LabelArgs),
    /// Mean bits per direction under the uniform and fitted vMF null models.
    Null(NullArgs),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// One non-negative integer cluster id per line.
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    /// (θ, φ) pairs in degrees; the bundled directions when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Fitted three-dimensional vMF mixture; inferred from the data when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = protein::PRECISION)]
    pub epsilon: f64,
    #[arg(long, default_value_t = protein::RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage", message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            code: i32,
            message: &'a str,
        }
        let line = Line { error: self.kind, code: self.code, message: &self.message };
        f.write_str(&serde_json::to_string(&line).map_err(|_| fmt::Error)?)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let numeric = matches!(
            e,
            Error::Singular
                | Error::ZeroResultant
                | Error::Collapse { .. }
                | Error::AllAnnihilated
                | Error::NonFinite(_)
                | Error::Underflow { .. }
        );
        if numeric {
            CliError { code: EXIT_NUMERIC, kind: "numeric", message: e.to_string() }
        } else {
            CliError { code: EXIT_DATA, kind: "data", message: e.to_string() }
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Data(inner) => inner.into(),
            other => CliError { code: EXIT_DATA, kind: "data", message: other.to_string() },
        }
    }
}

/// Prefixes file-level failures with the offending path.
fn at(path: &Path) -> impl Fn(IoError) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        if err.kind == "data" {
            err.message = format!("{}: {}", path.display(), err.message);
        }
        err
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        IoError::from(e).into()
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let message = e.to_string();
                let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
                eprintln!("{}", CliError::usage(first));
            }
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

fn seed_override(flag: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::usage(format!("{SEED_ENV} is not an unsigned integer: {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(IoError::from)?;
    println!("{text}");
    Ok(())
}

fn breakdown_path(output: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| output.with_extension("breakdown.json"))
}

/// Saves `model` and the message-length breakdown of the model as it reads
/// back from disk, so rescoring the saved file reproduces it exactly.
fn save_with_breakdown(model: &MixtureModel, data: &DataSet, output: &Path, breakdown: &Path) -> Result<f64, CliError> {
    let stored = ModelJson::from_model(model).to_model()?;
    let b = mixture_msglen(&stored, data)?;
    save_model(output, &stored)?;
    write_json(breakdown, &BreakdownJson::from(&b))?;
    Ok(b.total)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or_else(available_threads).max(1);
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Search(a) => search(a, threads),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Benchmark(a) => benchmark(a, threads),
        Command::Compare(a) => compare(a),
        Command::Eval(a) => eval(a),
    }
}

fn em_config(a: &EmArgs, mode: EmMode) -> Result<EmConfig, CliError> {
    if !(a.tol > 0.0) {
        return Err(CliError::usage("--tol must be positive"));
    }
    Ok(EmConfig { mode, tol: a.tol, max_iter: a.max_iter, ..EmConfig::default() })
}

#[derive(Serialize)]
struct FitSummary {
    m: usize,
    total_bits: f64,
    model: PathBuf,
    breakdown: PathBuf,
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let data = a.data.load()?;
    let mode = match a.mode {
        ModeArg::Mml => EmMode::Mml,
        ModeArg::Ml => EmMode::Ml,
    };
    let em = em_config(&a.em, mode)?;
    let seed = seed_override(a.em.seed)?;
    let fit = fit_fixed_m(&data, a.data.family.into(), a.m, a.restarts, seed, &em)?;
    let bpath = breakdown_path(&a.output, &a.breakdown);
    let total = save_with_breakdown(&fit.model, &data, &a.output, &bpath)?;
    print_json(&FitSummary { m: fit.model.m(), total_bits: total, model: a.output, breakdown: bpath })
}

fn search(a: SearchArgs, threads: usize) -> Result<(), CliError> {
    let data = a.data.load()?;
    let strategy = match a.strategy {
        StrategyArg::Mml => SearchStrategy::MmlSearch,
        StrategyArg::Fj => SearchStrategy::FjSearch,
    };
    let config = SearchConfig {
        strategy,
        em: em_config(&a.em, EmMode::Mml)?,
        min_improvement: a.min_improvement,
        fj_initial_m: a.initial_m,
        seed: seed_override(a.em.seed)?,
        ..SearchConfig::default()
    };
    let outcome = infer_mixture_with(&data, a.data.family.into(), &config, &Threaded { threads })?;
    if let Some(path) = &a.trace {
        write_jsonl(path, outcome.trace.rounds.iter().map(RoundJson::from))?;
    }
    let bpath = breakdown_path(&a.output, &a.breakdown);
    let total = save_with_breakdown(&outcome.model, &data, &a.output, &bpath)?;
    print_json(&FitSummary { m: outcome.model.m(), total_bits: total, model: a.output, breakdown: bpath })
}

fn preset_model(p: Preset, delta: f64) -> Result<MixtureModel, CliError> {
    Ok(match p {
        Preset::Protein => protein::reference_mixture()?,
        Preset::Bivariate => bivariate_pair(delta)?,
        Preset::SmallSample => ten_variate_pair(delta)?,
        Preset::ThreeBars => three_bars()?,
        Preset::VmfSeparated => vmf_family(3, &[10.0, 100.0], &[0.0, 20.0])?,
        Preset::VmfSharedMean => vmf_family(10, &[10.0, 100.0], &[0.0, 0.0])?,
    })
}

fn simulate_cmd(a: SimulateArgs) -> Result<(), CliError> {
    let model = match (&a.model, a.preset) {
        (Some(path), _) => load_model(path).map_err(at(path))?,
        (None, Some(p)) => preset_model(p, a.delta)?,
        (None, None) => return Err(CliError::usage("either --preset or --model is required")),
    };
    let seed = seed_override(a.seed)?;
    let (data, labels) = simulate(&model, a.n, seed)?;
    if a.preset == Some(Preset::Protein) {
        let angles: Vec<f64> = data
            .rows()
            .flat_map(|x| {
                let (t, p) = protein::unit_to_angles(x);
                [t, p]
            })
            .collect();
        write_rows(&a.output, &angles, 2)?;
    } else {
        write_rows(&a.output, data.values(), data.d())?;
    }
    if let Some(path) = &a.labels {
        let values: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        write_rows(path, &values, 1)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TableSummary {
    experiment: &'static str,
    rows: usize,
    csv: PathBuf,
    tsv: PathBuf,
}

fn benchmark(a: BenchmarkArgs, threads: usize) -> Result<(), CliError> {
    let seed = seed_override(a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    let (name, rows, (csv, tsv)) = if a.experiment == Experiment::Kappa {
        let mut spec = KappaBenchmarkSpec::standard(a.full, seed);
        spec.threads = threads;
        if let Some(t) = a.trials {
            spec.trials = t;
        }
        let rows = run_kappa_benchmark(&spec)?;
        let paths = write_table(&a.out, "kappa", &spec.grid_description(), &rows)?;
        ("kappa", rows.len(), paths)
    } else {
        let (name, spec) = match a.experiment {
            Experiment::Bivariate => ("bivariate", RecoverySpec::bivariate(a.full, seed)?),
            Experiment::SmallSample => ("small_sample", RecoverySpec::small_sample(a.full, seed)?),
            Experiment::VmfSeparated => ("vmf_separated", RecoverySpec::vmf_separated(a.full, seed)?),
            _ => ("vmf_shared_mean", RecoverySpec::vmf_shared_mean(a.full, seed)?),
        };
        let mut spec = spec;
        spec.threads = threads;
        spec.kl_samples = a.kl_samples;
        spec.search.min_improvement = a.min_improvement;
        if let Some(t) = a.trials {
            spec.trials = t;
        }
        let rows = run_recovery_study(&spec)?;
        let paths = write_table(&a.out, &spec.name, &spec.grid_description(), &rows)?;
        (name, rows.len(), paths)
    };
    print_json(&TableSummary { experiment: name, rows, csv, tsv })
}

#[derive(Serialize)]
struct ModelScores {
    model: PathBuf,
    m: usize,
    i_mml_bits: f64,
    i_fj_nats: f64,
    aic_nats: f64,
    bic_nats: f64,
}

#[derive(Serialize)]
struct TruthComparison {
    delta_i_mml_bits: f64,
    delta_i_fj_bits: f64,
    kl_first_nats: f64,
    kl_second_nats: f64,
}

#[derive(Serialize)]
struct CompareReport {
    models: Vec<ModelScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<TruthComparison>,
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let data = a.data.load()?;
    let models = a.models.iter().map(|p| load_model(p).map_err(at(p))).collect::<Result<Vec<_>, _>>()?;
    let mut scores = Vec::with_capacity(models.len());
    for (path, model) in a.models.iter().zip(&models) {
        let r = score_report(model, &data)?;
        scores.push(ModelScores {
            model: path.clone(),
            m: model.m(),
            i_mml_bits: r.i_mml,
            i_fj_nats: r.i_fj,
            aic_nats: r.aic,
            bic_nats: r.bic,
        });
    }
    let truth = match &a.truth {
        None => None,
        Some(path) => {
            let [ours, theirs] = models.as_slice() else {
                return Err(CliError::usage("--truth needs exactly two --model files"));
            };
            let truth = load_model(path).map_err(at(path))?;
            let r = compare_models(&truth, ours, theirs, &data, a.kl_samples, seed_override(a.seed)?)?;
            Some(TruthComparison {
                delta_i_mml_bits: r.delta_i_mml,
                delta_i_fj_bits: r.delta_i_fj,
                kl_first_nats: r.kl_ours,
                kl_second_nats: r.kl_theirs,
            })
        }
    };
    print_json(&CompareReport { models: scores, truth })
}

fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
    let (values, d) = parse_rows(&text).map_err(at(path))?;
    if d != 1 {
        return Err(CliError { code: EXIT_DATA, kind: "data", message: format!("{}: expected one column", path.display()) });
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError {
                    code: EXIT_DATA,
                    kind: "data",
                    message: format!("{}: label {v} in row {} is not a non-negative integer", path.display(), i + 1),
                })
            }
        })
        .collect()
}

#[derive(Serialize)]
struct MetricValue {
    metric: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct NullReport {
    n: usize,
    components: usize,
    uniform_bits: f64,
    vmf_bits: f64,
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    match a.metric {
        Metric::Mi(l) => {
            let value = mutual_information(&read_labels(&l.assignments)?, &read_labels(&l.truth)?)?;
            print_json(&MetricValue { metric: "mutual_information_nats", value })
        }
        Metric::FMeasure(l) => {
            let value = f_measure(&read_labels(&l.assignments)?, &read_labels(&l.truth)?)?;
            print_json(&MetricValue { metric: "f_measure", value })
        }
        Metric::Null(n) => null_report(n),
    }
}

fn null_report(a: NullArgs) -> Result<(), CliError> {
    let (values, d) = match &a.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
            parse_rows(&text).map_err(at(path))?
        }
        None => parse_rows(protein::BUNDLED_ANGLES)?,
    };
    if d != 2 {
        return Err(CliError { code: EXIT_DATA, kind: "data", message: format!("angle files need 2 columns, found {d}") });
    }
    let model = match &a.model {
        Some(path) => load_model(path).map_err(at(path))?,
        None => {
            let units: Vec<f64> =
                values.chunks_exact(2).flat_map(|p| mmlmix_core::vmf::angles_to_unit(p[0].to_radians(), p[1].to_radians())).collect();
            let data = DataSet::normalized(units, 3)?;
            let config = SearchConfig { seed: seed_override(a.seed)?, ..SearchConfig::default() };
            infer_mixture_with(&data, Family::Vmf, &config, &Threaded { threads: available_threads() })?.model
        }
    };
    let n = values.len() / 2;
    let (mut uniform, mut vmf) = (0.0, 0.0);
    for p in values.chunks_exact(2) {
        let (t, f) = (p[0].to_radians(), p[1].to_radians());
        uniform += null_model_bits(NullModel::Uniform, None, t, f, a.epsilon, a.radius)?;
        vmf += null_model_bits(NullModel::Vmf, Some(&model), t, f, a.epsilon, a.radius)?;
    }
    print_json(&NullReport { n, components: model.m(), uniform_bits: uniform / n as f64, vmf_bits: vmf / n as f64 })
}
