//! The `margspline` command line.
//!
//! ```text
//! margspline [--threads N] [--out DIR] [--config FILE] <simulate|tune|fit|reduce> [flags]
//! ```
//!
//! Flags are collected into a JSON object, the `--config` file is merged over
//! it (file values win, objects merge key by key), and the result is read into
//! the command's run configuration with unknown keys rejected. `--out`
//! defaults to `$MARGSPLINE_OUT`, then the working directory.
//!
//! Every JSON report has the envelope
//! `{"schema_version": 1, "command", "config", "result"}` where `config` is the
//! fully resolved run configuration.
//!
//! | command | files |
//! |---|---|
//! | `simulate` | `simulate_report.json`, `simulate_summary.csv` (one row per model, header [`BatchReport::CSV_HEADER`]), `simulate_marginals.csv` (`x,true,fit0,fit1,fit2`) |
//! | `tune --mode sequential` | `tune_report.json`, `tune_trace.csv` (`replicate,lambda,fold,metric,value,stage`) |
//! | `tune --mode cv` | `tune_report.json`, `tune_trace.csv` (same header, empty replicate) |
//! | `fit` | `fit_report.json`, `fit_curves.csv` (`x,z,y,theta_v,` then `theta_fitK,marginal_fitK` per fitted model) |
//! | `reduce` | `reduce_report.json`, `reduced_h.csv` (`x,z,y`), `reduced_v.csv` (`x,y`, when V is given) |
//!
//! Input CSVs are described in [`crate::io`]. Exit codes: 0 success, 1 usage
//! or configuration, 2 data, schema or I/O, 3 numerical failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::application::{estimate_v_marginal, run_application, ApplicationConfig, ApplicationReport, HData, VData};
use crate::design::build_roughness;
use crate::error::{Error, Result};
use crate::fit_logistic::NewtonConfig;
use crate::io::{read_h, read_v, HInput, VInput};
use crate::marginal::build_kernel;
use crate::reduce::{reduce_pair, ReducedPair, Reducer, ReductionMethod, Rescale};
use crate::simulate::{reference_p, reference_recipe, run_batch, BatchReport, Evaluator, FitRecipe, SimConfig};
use crate::tune::{
    kfold_cv_lambda1, select_lambda2, sequential_search, Lambda2Rule, LambdaGrid, MarginalProblem, Metric, TraceEntry,
    TuningReport,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "margspline", version, about = "Twice-penalized P-splines for a wide cohort H and a narrow cohort V")]
pub struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "MARGSPLINE_OUT", default_value = ".")]
    pub out: PathBuf,
    /// JSON file merged over the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo batch of Fit0, Fit1 and Fit2 on one configuration.
    Simulate(SimulateArgs),
    /// Choose penalties by sequential search on simulations or by cross-validation on data.
    Tune(TuneArgs),
    /// Fit the three models to H with the marginal estimated from V.
    Fit(FitArgs),
    /// Reduce raw covariate blocks to scalar x and z.
    Reduce(ReduceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    /// Use the surface with an x–z interaction.
    #[arg(long)]
    pub interaction: bool,
    /// Bernoulli response instead of Gaussian noise.
    #[arg(long)]
    pub binary: bool,
    /// Grid points per replicate (a perfect square).
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Noise standard deviation for a continuous response.
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Basis size for both covariates.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub px: Option<usize>,
    #[arg(long)]
    pub pz: Option<usize>,
    /// Copies of each grid point in a binary replicate.
    #[arg(long, default_value_t = 1)]
    pub nrep: usize,
    #[arg(long, default_value_t = 25)]
    pub nsim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub sigma_k: Option<f64>,
}

impl SimFlags {
    fn to_json(&self) -> Value {
        let fallback = if self.binary { 8 } else { reference_p(self.n) };
        let mut m = Map::new();
        m.insert("n_h".into(), json!(self.n));
        m.insert("sigma_noise".into(), json!(if self.binary { 0.0 } else { self.sigma }));
        m.insert("interaction".into(), json!(self.interaction));
        m.insert("binary".into(), json!(self.binary));
        m.insert("px".into(), json!(self.px.or(self.p).unwrap_or(fallback)));
        m.insert("pz".into(), json!(self.pz.or(self.p).unwrap_or(fallback)));
        m.insert("nrep".into(), json!(self.nrep));
        m.insert("nsim".into(), json!(self.nsim));
        m.insert("seed".into(), json!(self.seed));
        if let Some(s) = self.sigma_k {
            m.insert("sigma_k".into(), json!(s));
        }
        Value::Object(m)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    /// Roughness weight of Fit1. The three penalties default to the tuned
    /// values of the configuration when it is a reference row.
    #[arg(long)]
    pub lambda1a: Option<f64>,
    /// Roughness weight of Fit2.
    #[arg(long)]
    pub lambda1b: Option<f64>,
    /// Marginal weight of Fit2.
    #[arg(long)]
    pub lambda2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// Minimize the error against the simulation truth.
    Sequential,
    /// Cross-validate λ₁ on H and pick λ₂ against the V marginal.
    Cv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Ss,
    Loglik,
    Auc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    /// Smallest λ₂ halving the Fit1 marginal SS.
    Half,
    /// λ₂ with the lowest marginal SS.
    Best,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Pca,
    Glm,
}

#[derive(Debug, Clone, Args)]
pub struct DataFlags {
    /// H file: `x,z,y` or `y,<covariates…>`.
    #[arg(long)]
    pub h: Option<PathBuf>,
    /// Block manifest for a covariate H file.
    #[arg(long)]
    pub h_manifest: Option<PathBuf>,
    /// V file: `x,y` or `y,<covariates…>`.
    #[arg(long)]
    pub v: Option<PathBuf>,
    #[arg(long)]
    pub v_manifest: Option<PathBuf>,
    /// Reduction used for covariate files.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Lower quantile for trimming reduced H.
    #[arg(long, requires = "trim_upper")]
    pub trim_lower: Option<f64>,
    #[arg(long, requires = "trim_lower")]
    pub trim_upper: Option<f64>,
}

impl DataFlags {
    fn files_json(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, p: &Option<PathBuf>| {
            if let Some(p) = p {
                m.insert(k.into(), json!(p));
            }
        };
        put("h", &self.h);
        put("h_manifest", &self.h_manifest);
        put("v", &self.v);
        put("v_manifest", &self.v_manifest);
        Value::Object(m)
    }

    fn reduction_json(&self) -> Value {
        let mut m = Map::new();
        if let Some(method) = self.method {
            m.insert("method".into(), json!(method_of(method)));
        }
        if let (Some(lo), Some(hi)) = (self.trim_lower, self.trim_upper) {
            m.insert("trim".into(), json!([lo, hi]));
        }
        Value::Object(m)
    }
}

fn method_of(m: MethodArg) -> ReductionMethod {
    match m {
        MethodArg::Pca => ReductionMethod::Pca,
        MethodArg::Glm => ReductionMethod::LinearPredictor,
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisFlags {
    /// Basis size of the V fit.
    #[arg(long)]
    pub v_px: Option<usize>,
    /// Fixed λ for the V fit instead of cross-validation.
    #[arg(long)]
    pub v_lambda1: Option<f64>,
    /// Fixed λ₁ instead of cross-validation.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Fixed λ₂ instead of the selection rule.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// λ₁ grid as `start:stop:step` or a comma list.
    #[arg(long, value_parser = parse_grid)]
    pub grid1: Option<LambdaGrid>,
    #[arg(long, value_parser = parse_grid)]
    pub grid2: Option<LambdaGrid>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub cv_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
}

/// Surface structure, basis sizes and kernel bandwidth of the H fits.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub interaction: bool,
    #[arg(long)]
    pub px: Option<usize>,
    #[arg(long)]
    pub pz: Option<usize>,
    #[arg(long)]
    pub sigma_k: Option<f64>,
}

impl AnalysisFlags {
    fn to_json(&self, model: &ModelFlags) -> Value {
        let mut m = Map::new();
        m.insert("interaction".into(), json!(model.interaction));
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("px", model.px.map(|v| json!(v)));
        put("pz", model.pz.map(|v| json!(v)));
        put("sigma_k", model.sigma_k.map(|v| json!(v)));
        put("v_px", self.v_px.map(|v| json!(v)));
        put("v_lambda1", self.v_lambda1.map(|v| json!(v)));
        put("lambda1", self.lambda1.map(|v| json!(v)));
        put("lambda2", self.lambda2.map(|v| json!(v)));
        put("grid1", self.grid1.as_ref().map(|g| json!(g)));
        put("grid2", self.grid2.as_ref().map(|g| json!(g)));
        put(
            "rule",
            self.rule.map(|r| {
                json!(match r {
                    RuleArg::Half => Lambda2Rule::FiftyPercent,
                    RuleArg::Best => Lambda2Rule::BestFit2,
                })
            }),
        );
        let mut cv = Map::new();
        cv.insert(
            "metric".into(),
            json!(match self.metric {
                None | Some(MetricArg::Ss) => Metric::Ss,
                Some(MetricArg::Loglik) => Metric::LogLik,
                Some(MetricArg::Auc) => Metric::Auc,
            }),
        );
        if let Some(f) = self.folds {
            cv.insert("folds".into(), json!(f));
        }
        if let Some(s) = self.cv_seed {
            cv.insert("seed".into(), json!(s));
        }
        m.insert("cv".into(), Value::Object(cv));
        Value::Object(m)
    }
}

fn parse_grid(s: &str) -> std::result::Result<LambdaGrid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, c] => LambdaGrid::range(num(a)?, num(b)?, num(c)?),
        [_] => LambdaGrid::new(s.split(',').map(num).collect::<std::result::Result<_, _>>()?),
        _ => return Err("expected start:stop:step or a comma list".into()),
    };
    grid.map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, value_enum, default_value = "sequential")]
    pub mode: TuneMode,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub data: DataFlags,
}

/// Input files of `tune --mode cv`, `fit` and `reduce`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    #[serde(default)]
    pub h: Option<PathBuf>,
    #[serde(default)]
    pub h_manifest: Option<PathBuf>,
    #[serde(default)]
    pub v: Option<PathBuf>,
    #[serde(default)]
    pub v_manifest: Option<PathBuf>,
}

/// How covariate files become `x` and `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSettings {
    #[serde(default = "default_method")]
    pub method: ReductionMethod,
    /// Quantiles `[lower, upper]` for trimming H after reduction.
    #[serde(default)]
    pub trim: Option<(f64, f64)>,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_method() -> ReductionMethod {
    ReductionMethod::Pca
}

impl Default for ReductionSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub sim: SimConfig,
    /// Tuned reference values when absent.
    #[serde(default)]
    pub recipe: Option<FitRecipe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneRun {
    pub mode: TuneMode,
    /// Simulation settings of the sequential mode.
    pub sim: SimConfig,
    #[serde(default)]
    pub data: DataFiles,
    #[serde(default)]
    pub reduction: ReductionSettings,
    /// Grids and Newton settings of both modes; CV settings of the cv mode.
    #[serde(default)]
    pub analysis: ApplicationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRun {
    pub data: DataFiles,
    #[serde(default)]
    pub reduction: ReductionSettings,
    #[serde(default)]
    pub analysis: ApplicationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceRun {
    pub data: DataFiles,
    #[serde(default)]
    pub reduction: ReductionSettings,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Domain(_) | Error::Shape(_) | Error::Schema(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Rank { .. } | Error::Numerical { .. } | Error::Tuning(_) | Error::Reduction(_) => 3,
    }
}

/// Parse `args`, run the command and return the exit status. Messages go to
/// stdout and stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::config(format!("cannot start thread pool: {e}")))?;
    let overrides = cli.config.as_deref().map(read_config_file).transpose()?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(resolve(simulate_json(a), overrides)?, &cli.out),
        Command::Tune(a) => cmd_tune(resolve(tune_json(a), overrides)?, &cli.out),
        Command::Fit(a) => cmd_fit(resolve(fit_json(a), overrides)?, &cli.out),
        Command::Reduce(a) => cmd_reduce(resolve(reduce_json(a), overrides)?, &cli.out),
    })
}

fn read_config_file(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Error::config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(v)
}

/// Merge `over` into `base`; objects merge per key, anything else replaces.
pub fn merge_json(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn resolve<T: DeserializeOwned>(mut flags: Value, overrides: Option<Value>) -> Result<T> {
    if let Some(o) = overrides {
        merge_json(&mut flags, o);
    }
    serde_json::from_value(flags).map_err(|e| Error::config(e.to_string()))
}

fn simulate_json(a: &SimulateArgs) -> Value {
    let mut recipe = Map::new();
    for (k, v) in [("lambda1a", a.lambda1a), ("lambda1b", a.lambda1b), ("lambda2", a.lambda2)] {
        if let Some(v) = v {
            recipe.insert(k.into(), json!(v));
        }
    }
    let mut m = Map::new();
    m.insert("sim".into(), a.sim.to_json());
    if !recipe.is_empty() {
        m.insert("recipe".into(), Value::Object(recipe));
    }
    Value::Object(m)
}

fn tune_json(a: &TuneArgs) -> Value {
    // One set of model flags drives both the simulation and the H fits.
    let sim = a.sim.to_json();
    // The cv mode takes only explicit basis sizes; the simulation's fallback
    // sizes apply to the sequential mode alone.
    let basis = |explicit: Option<usize>, resolved: &Value| match a.mode {
        TuneMode::Sequential => resolved.as_u64().map(|v| v as usize),
        TuneMode::Cv => explicit.or(a.sim.p),
    };
    let model = ModelFlags {
        interaction: a.sim.interaction,
        px: basis(a.sim.px, &sim["px"]),
        pz: basis(a.sim.pz, &sim["pz"]),
        sigma_k: a.sim.sigma_k,
    };
    json!({
        "mode": a.mode,
        "sim": sim,
        "data": a.data.files_json(),
        "reduction": a.data.reduction_json(),
        "analysis": a.analysis.to_json(&model),
    })
}

fn fit_json(a: &FitArgs) -> Value {
    json!({
        "data": a.data.files_json(),
        "reduction": a.data.reduction_json(),
        "analysis": a.analysis.to_json(&a.model),
    })
}

fn reduce_json(a: &ReduceArgs) -> Value {
    json!({ "data": a.data.files_json(), "reduction": a.data.reduction_json() })
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

fn write_report<C: Serialize, R: Serialize>(path: &Path, command: &str, config: &C, result: &R) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Envelope { schema_version: SCHEMA_VERSION, command, config, result })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn out_file(out: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    Ok(out.join(name))
}

pub fn cmd_simulate(mut run: SimulateRun, out: &Path) -> Result<Vec<PathBuf>> {
    run.sim.validate()?;
    let recipe = match run.recipe.clone().or_else(|| reference_recipe(&run.sim)) {
        Some(r) => r,
        None => {
            return Err(Error::config(
                "no tuned penalties for this configuration; give --lambda1a, --lambda1b and --lambda2",
            ))
        }
    };
    run.recipe = Some(recipe.clone());
    let report = run_batch(&run.sim, &recipe)?;
    if report.n_failed > 0 {
        eprintln!("warning: {} of {} replicates failed", report.n_failed, run.sim.nsim);
    }

    let json_path = out_file(out, "simulate_report.json")?;
    write_report(&json_path, "simulate", &run, &report)?;
    let csv_path = out.join("simulate_summary.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(BatchReport::CSV_HEADER)?;
    for rec in report.csv_records() {
        w.write_record(&rec)?;
    }
    w.flush()?;
    let marg_path = out.join("simulate_marginals.csv");
    report.write_marginal_csv(BufWriter::new(File::create(&marg_path)?))?;
    Ok(vec![json_path, csv_path, marg_path])
}

/// Per-replicate reports of a sequential search and their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialSummary {
    pub mean_lambda1a: f64,
    pub mean_lambda1b: f64,
    pub mean_lambda2: f64,
    pub replicates: Vec<TuningReport>,
}

pub fn cmd_tune(run: TuneRun, out: &Path) -> Result<Vec<PathBuf>> {
    let json_path = out_file(out, "tune_report.json")?;
    let trace_path = out.join("tune_trace.csv");
    let traces: Vec<(Option<usize>, &[TraceEntry])>;
    match run.mode {
        TuneMode::Sequential => {
            run.sim.validate()?;
            let a = &run.analysis;
            let recipe = FitRecipe { newton: a.newton.clone(), ..FitRecipe::new(0.0, 0.0, 0.0) };
            let eval = Evaluator::new(&run.sim, &recipe)?;
            let reps = (0..run.sim.nsim as u64)
                .map(|r| sequential_search(&eval, &eval.setup.draw(r), &a.grid1, &a.grid2))
                .collect::<Result<Vec<_>>>()?;
            let n = reps.len() as f64;
            let summary = SequentialSummary {
                mean_lambda1a: reps.iter().map(|r| r.lambda1a).sum::<f64>() / n,
                mean_lambda1b: reps.iter().map(|r| r.lambda1b).sum::<f64>() / n,
                mean_lambda2: reps.iter().map(|r| r.lambda2.unwrap_or(f64::NAN)).sum::<f64>() / n,
                replicates: reps,
            };
            write_report(&json_path, "tune", &run, &summary)?;
            traces = summary.replicates.iter().enumerate().map(|(i, r)| (Some(i), r.trace.as_slice())).collect();
            write_trace(&trace_path, &traces)?;
        }
        TuneMode::Cv => {
            let (h, v, _) = load_inputs(&run.data, &run.reduction)?;
            let report = tune_cv(&h, v.as_ref(), &run.analysis)?;
            write_report(&json_path, "tune", &run, &report)?;
            traces = vec![(None, report.trace.as_slice())];
            write_trace(&trace_path, &traces)?;
        }
    }
    Ok(vec![json_path, trace_path])
}

fn write_trace(path: &Path, traces: &[(Option<usize>, &[TraceEntry])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["replicate"];
    header.extend(TuningReport::TRACE_HEADER);
    w.write_record(&header)?;
    for (rep, trace) in traces {
        for t in trace.iter() {
            w.write_record([
                rep.map(|r| r.to_string()).unwrap_or_default(),
                t.lambda.to_string(),
                t.fold.map(|f| f.to_string()).unwrap_or_default(),
                t.metric.clone(),
                t.value.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
                t.stage.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Cross-validated `λ₁` on H, then `λ₂` against the V marginal when V is given.
pub fn tune_cv(h: &HData, v: Option<&VData>, config: &ApplicationConfig) -> Result<TuningReport> {
    h.validate()?;
    let layout = config.layout();
    let d = layout.design(&h.x, &h.z)?;
    let roughness = build_roughness(&layout)?;
    let cv = kfold_cv_lambda1(&d, &h.y, &roughness, &config.grid1, &config.cv)?;
    let mut trace = cv.trace.clone();
    let mut warnings = cv.warnings.clone();
    let mut lambda2 = None;
    if let Some(v) = v {
        let vm =
            estimate_v_marginal(v, config.v_px, config.v_lambda1, &config.grid1, &config.cv, &config.newton, &h.x)?;
        if !vm.converged {
            warnings.push("V fit did not converge".into());
        }
        let kernel = build_kernel(&h.x, &h.x, config.sigma_k)?;
        let problem = MarginalProblem {
            d: &d,
            y: &h.y,
            roughness: &roughness,
            kernel: &kernel,
            target: &vm.curve,
            newton: &config.newton,
        };
        let sel = select_lambda2(&problem, cv.lambda1, &config.grid2, config.rule)?;
        if sel.lambda2.is_none() {
            warnings.push("no λ₂ on the grid halves the Fit1 marginal discrepancy".into());
        }
        lambda2 = sel.lambda2;
        trace.extend(sel.trace);
    }
    Ok(TuningReport {
        lambda1a: cv.lambda1,
        lambda1b: cv.lambda1,
        lambda2,
        metric: config.cv.metric,
        lambda2_rule: v.map(|_| config.rule),
        cv_folds: Some(config.cv.folds),
        trace,
        warnings,
    })
}

/// Summary of a reduction without the reduced data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub method: ReductionMethod,
    pub x_reducer: Reducer,
    pub z_reducer: Reducer,
    pub x_rescale: Rescale,
    pub z_rescale: Rescale,
    pub n_h: usize,
    pub n_v: Option<usize>,
    pub removed_h: usize,
    pub removed_v: usize,
    pub warnings: Vec<String>,
}

impl From<&ReducedPair> for ReductionSummary {
    fn from(p: &ReducedPair) -> Self {
        ReductionSummary {
            method: p.method,
            x_reducer: p.x_reducer.clone(),
            z_reducer: p.z_reducer.clone(),
            x_rescale: p.x_rescale,
            z_rescale: p.z_rescale,
            n_h: p.h.x.len(),
            n_v: p.v.as_ref().map(|v| v.x.len()),
            removed_h: p.removed_h,
            removed_v: p.removed_v,
            warnings: p.warnings.clone(),
        }
    }
}

/// Read H and optional V, reducing covariate files when needed. Both files
/// must be in the same form.
fn load_inputs(files: &DataFiles, red: &ReductionSettings) -> Result<(HData, Option<VData>, Option<ReductionSummary>)> {
    let h_path = files.h.as_deref().ok_or_else(|| Error::config("an H file is required (--h)"))?;
    let h = read_h(h_path, files.h_manifest.as_deref())?;
    let v = files.v.as_deref().map(|p| read_v(p, files.v_manifest.as_deref())).transpose()?;
    match (h, v) {
        (HInput::Reduced(h), None) => Ok((h, None, None)),
        (HInput::Reduced(h), Some(VInput::Reduced(v))) => Ok((h, Some(v), None)),
        (HInput::Raw(h), v) => {
            let v = match v {
                None => None,
                Some(VInput::Raw(v)) => Some(v),
                Some(VInput::Reduced(_)) => {
                    return Err(Error::Schema(
                        "H holds covariates but V is already reduced; give both in the same form".into(),
                    ))
                }
            };
            let pair = reduce_pair(&h, v.as_ref(), red.method, red.trim, &red.newton)?;
            let summary = ReductionSummary::from(&pair);
            Ok((pair.h, pair.v, Some(summary)))
        }
        (HInput::Reduced(_), Some(VInput::Raw(_))) => {
            Err(Error::Schema("H is reduced but V holds covariates; give both in the same form".into()))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct FitResult<'a> {
    reduction: &'a Option<ReductionSummary>,
    application: &'a ApplicationReport,
}

pub fn cmd_fit(run: FitRun, out: &Path) -> Result<Vec<PathBuf>> {
    let (h, v, reduction) = load_inputs(&run.data, &run.reduction)?;
    let v = v.ok_or_else(|| Error::config("fit needs a V file (--v)"))?;
    let report = run_application(&h, &v, &run.analysis)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let json_path = out_file(out, "fit_report.json")?;
    write_report(&json_path, "fit", &run, &FitResult { reduction: &reduction, application: &report })?;

    let csv_path = out.join("fit_curves.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["x".to_string(), "z".into(), "y".into(), "theta_v".into()];
    for m in &report.models {
        header.push(format!("theta_{}", m.model.name()));
        header.push(format!("marginal_{}", m.model.name()));
    }
    w.write_record(&header)?;
    for i in 0..h.x.len() {
        let mut rec = vec![
            h.x[i].to_string(),
            h.z[i].to_string(),
            h.y[i].to_string(),
            report.v_marginal.curve.theta[i].to_string(),
        ];
        for m in &report.models {
            rec.push(m.theta_hat[i].to_string());
            rec.push(m.marginal[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(vec![json_path, csv_path])
}

pub fn cmd_reduce(run: ReduceRun, out: &Path) -> Result<Vec<PathBuf>> {
    let (h, v, summary) = load_inputs(&run.data, &run.reduction)?;
    let summary = summary.ok_or_else(|| Error::Schema("reduce needs covariate files with block manifests".into()))?;
    let json_path = out_file(out, "reduce_report.json")?;
    write_report(&json_path, "reduce", &run, &summary)?;
    let h_path = out.join("reduced_h.csv");
    crate::io::write_columns(&h_path, &["x", "z", "y"], &[&h.x, &h.z, &h.y])?;
    let mut files = vec![json_path, h_path];
    if let Some(v) = v {
        let v_path = out.join("reduced_v.csv");
        crate::io::write_columns(&v_path, &["x", "y"], &[&v.x, &v.y])?;
        files.push(v_path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn merge_overrides_leaves() {
        let mut a = json!({"sim": {"n_h": 100, "px": 8}, "x": 1});
        merge_json(&mut a, json!({"sim": {"n_h": 400}, "y": [1]}));
        assert_eq!(a, json!({"sim": {"n_h": 400, "px": 8}, "x": 1, "y": [1]}));
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("0:2:0.5").unwrap().values(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("1,3,10").unwrap().values(), &[1.0, 3.0, 10.0]);
        assert!(parse_grid("3,1").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let cli = Cli::try_parse_from(["margspline", "simulate", "--n", "100"]).unwrap();
        let Command::Simulate(a) = &cli.command else { unreachable!() };
        let e = resolve::<SimulateRun>(simulate_json(a), Some(json!({"sim": {"bogus": 1}}))).unwrap_err();
        assert_eq!(exit_code(&e), 1);
        let ok: SimulateRun = resolve(simulate_json(a), Some(json!({"sim": {"nsim": 3}}))).unwrap();
        assert_eq!((ok.sim.n_h, ok.sim.nsim, ok.sim.px), (100, 3, 8));
    }

    #[test]
    fn partial_recipe_is_a_config_error() {
        let cli = Cli::try_parse_from(["margspline", "simulate", "--lambda1a", "1"]).unwrap();
        let Command::Simulate(a) = &cli.command else { unreachable!() };
        assert!(matches!(resolve::<SimulateRun>(simulate_json(a), None), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Schema("x".into())), 2);
        assert_eq!(exit_code(&Error::Rank { condition: 1e20 }), 3);
        assert_eq!(exit_code(&Error::Tuning("x".into())), 3);
        assert_eq!(main_with_args(["margspline", "nonsense"]), 1);
        assert_eq!(main_with_args(["margspline", "--help"]), 0);
    }
}
