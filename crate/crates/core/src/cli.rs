//! The `cmnet` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 capacity
//! exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, make_folds, sample_joint, Dataset, JointTable, Schema};
use crate::error::{Error, Result};
use crate::eval::{cross_validated_accuracy, kl_divergence, CvResult, ExperimentReport, LearnConfig};
use crate::model::{ContextualStructure, StructureJson};
use crate::params::{fit_mle, FitOptions, LogLinearJson, LogLinearModel, PhiTerm};
use crate::scoring::{self, Kappa, KappaSpec, ScoredModel};
use crate::search::SearchOptions;
use crate::DEFAULT_TABLE_CAP;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cmnet", version, about = "Learn contextual Markov networks from categorical data")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search structures over a kappa grid, fit them, and keep the best BIC.
    Learn(LearnArgs),
    /// Fit maximum-likelihood parameters for a given structure.
    Fit(FitArgs),
    /// Draw a dataset from a fitted model.
    Sample(SampleArgs),
    /// Cross-validated accuracy and/or KL divergence to a true distribution.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Categorical CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// JSON sidecar with variable names and cardinalities.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Cap on the number of cells of a dense joint table.
    #[arg(long, default_value_t = DEFAULT_TABLE_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    /// Gradient-norm tolerance of the MLE fit.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Iteration limit of the MLE fit.
    #[arg(long, default_value_t = 500)]
    pub fit_iter: usize,
    /// Fit the raw empirical table without the 1e-6 smoothing mass.
    #[arg(long)]
    pub no_smoothing: bool,
}

#[derive(Debug, Args)]
pub struct SearchFlags {
    /// Context prior strength: `eps`, a number in (0, 1], or `n^-p`.
    /// Repeat for a grid; default eps, n^-1, n^-1/2, n^-1/4.
    #[arg(long = "kappa", value_parser = parse_kappa)]
    pub kappa: Vec<KappaSpec>,
    /// Dirichlet hyperparameter.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Graph hill-climb iteration limit (default 10·d²).
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchFlags,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Output path of the selected model; the MN model and the report are
    /// written next to it as `<stem>.mn.json` and `<stem>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for uniformity; the search itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Structure (or model) JSON.
    #[arg(long)]
    pub structure: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TABLE_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchFlags,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Number of cross-validation folds (used with --data).
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// True distribution: a joint table JSON or a fitted model JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Fitted model compared against --truth.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_kappa(s: &str) -> std::result::Result<KappaSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Statistics stored alongside a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_mpl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_prior: Option<f64>,
    pub log_lik: f64,
    pub dimension: usize,
    pub bic: f64,
    pub sbic: f64,
}

/// On-disk model: structure fields, then optional parameters and stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub structure: StructureJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<PhiTerm>>,
    #[serde(rename = "logZ", default, skip_serializing_if = "Option::is_none")]
    pub log_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<ModelStats>,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn from_scored(sm: &ScoredModel, names: &[String], n: usize, alpha: f64) -> Self {
        let mut structure = sm.structure.to_json();
        structure.variable_names = Some(names.to_vec());
        let params = sm.model.as_ref().map(LogLinearModel::to_json);
        Self {
            structure,
            log_z: params.as_ref().map(|p| p.log_z),
            phi: params.map(|p| p.phi),
            stats: Some(ModelStats {
                n,
                kappa: Some(sm.kappa),
                alpha: Some(alpha),
                log_mpl: Some(sm.log_mpl),
                log_prior: Some(sm.log_prior),
                log_lik: sm.log_lik,
                dimension: sm.dimension,
                bic: sm.bic,
                sbic: sm.sbic,
            }),
        }
    }

    /// The fitted model, or an error pointing at `fit` when φ is absent.
    pub fn model(&self) -> Result<LogLinearModel> {
        match (&self.phi, self.log_z) {
            (Some(phi), Some(log_z)) => LogLinearModel::from_json(
                &self.structure,
                &LogLinearJson {
                    phi: phi.clone(),
                    log_z,
                },
            ),
            _ => Err(Error::invalid(
                "model has no parameters (phi/logZ); run `cmnet fit` on it first",
            )),
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Learn(a) => cmd_learn(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Sample(a) => cmd_sample(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
    }
}

fn load_data(a: &DataArgs) -> Result<Dataset> {
    let path = a
        .data
        .as_ref()
        .ok_or_else(|| Error::invalid("--data is required"))?;
    let schema = a.schema.as_ref().map(Schema::load).transpose()?;
    load_csv(path, !a.no_header, schema.as_ref())
}

fn fit_options(f: &FitFlags, cap: usize) -> Result<FitOptions> {
    if f.tol.is_nan() || f.tol <= 0.0 {
        return Err(Error::invalid("--tol must be positive"));
    }
    Ok(FitOptions {
        tolerance: f.tol,
        max_iter: f.fit_iter,
        smoothing: if f.no_smoothing { None } else { Some(1e-6) },
        cap,
    })
}

fn learn_config(s: &SearchFlags, f: &FitFlags, cap: usize) -> Result<LearnConfig> {
    Ok(LearnConfig {
        grid: if s.kappa.is_empty() {
            KappaSpec::default_grid()
        } else {
            s.kappa.clone()
        },
        alpha: s.alpha,
        search: SearchOptions {
            max_iter: s.max_iter,
            ..SearchOptions::default()
        },
        fit: fit_options(f, cap)?,
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_learn(a: &LearnArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load_data(&a.data)?;
    let config = learn_config(&a.search, &a.fit, a.data.cap)?;
    let sweep = config.sweep(&ds)?;
    let names = ds.variable_names();
    ModelFile::from_scored(sweep.selected(), names, ds.n(), config.alpha).write(&a.out)?;
    ModelFile::from_scored(sweep.mn(), names, ds.n(), config.alpha).write(&sibling(&a.out, ".mn.json"))?;
    let report = ExperimentReport::from_sweep(ds.n(), &sweep, None, a.data.cap)?;
    write_text(&sibling(&a.out, ".report.json"), &(report.to_json()? + "\n"))?;
    write!(out, "{}", report.to_text())?;
    writeln!(out)?;
    write!(out, "{}", sweep.selected().structure.render_labeled_graph(Some(names)))?;
    Ok(())
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load_data(&a.data)?;
    let file = ModelFile::read(&a.structure)?;
    let s = ContextualStructure::from_json(&file.structure)?;
    if s.d() != ds.d() {
        return Err(Error::ShapeMismatch(format!(
            "structure has {} variables but the data has {}",
            s.d(),
            ds.d()
        )));
    }
    // cardinalities may only grow to match the structure
    let ds = if ds.cardinalities() != s.cardinalities() {
        ds.with_cardinalities(s.cardinalities().to_vec())?
    } else {
        ds
    };
    let fitted = fit_mle(&ds, &s, &fit_options(&a.fit, a.data.cap)?)?;
    let dimension = fitted.constraints.nominal_dimension - fitted.constraints.rank;
    let sm = ScoredModel {
        structure: s,
        kappa: Kappa::Epsilon,
        log_mpl: f64::NAN,
        log_prior: f64::NAN,
        dimension,
        log_lik: fitted.log_lik,
        bic: scoring::bic(fitted.log_lik, dimension, ds.n()),
        sbic: scoring::sbic(fitted.log_lik, dimension, ds.n()),
        model: Some(fitted.model),
    };
    let mut mf = ModelFile::from_scored(&sm, ds.variable_names(), ds.n(), f64::NAN);
    if let Some(stats) = mf.stats.as_mut() {
        stats.kappa = None;
        stats.alpha = None;
        stats.log_mpl = None;
        stats.log_prior = None;
    }
    if let Some(names) = &file.structure.variable_names {
        mf.structure.variable_names = Some(names.clone());
    }
    match &a.out {
        Some(p) => mf.write(p)?,
        None => writeln!(out, "{}", serde_json::to_string_pretty(&mf)?)?,
    }
    Ok(())
}

fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let file = ModelFile::read(&a.model)?;
    let model = file.model()?;
    let table = model.joint_of(a.cap)?;
    let n = usize::try_from(a.n).map_err(|_| Error::invalid("--n too large"))?;
    let mut ds = sample_joint(&table, n, a.seed, a.cap)?;
    if let Some(names) = &file.structure.variable_names {
        ds = ds.with_names(names.clone())?;
    }
    match &a.out {
        Some(p) => ds.write_csv(fs::File::create(p)?)?,
        None => ds.write_csv(out)?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvResult>,
    /// `null` when the divergence is infinite.
    #[serde(skip_serializing_if = "Option::is_none")]
    kl: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kl_infinite: Option<bool>,
}

fn load_truth(path: &Path, cap: usize) -> Result<JointTable> {
    let text = fs::read_to_string(path)?;
    if let Ok(t) = serde_json::from_str::<JointTable>(&text) {
        t.validate()?;
        return Ok(t);
    }
    let file: ModelFile = serde_json::from_str(&text)?;
    file.model()?.joint_of(cap)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cap = a.data.cap;
    let mut result = EvalOutput {
        cv: None,
        kl: None,
        kl_infinite: None,
    };
    if a.data.data.is_some() {
        let ds = load_data(&a.data)?;
        let folds = make_folds(ds.n(), a.folds, a.seed)?;
        let config = learn_config(&a.search, &a.fit, cap)?;
        result.cv = Some(cross_validated_accuracy(&ds, &folds, &config)?);
    }
    match (&a.truth, &a.model) {
        (Some(t), Some(m)) => {
            let truth = load_truth(t, cap)?;
            let fitted = ModelFile::read(m)?.model()?.joint_of(cap)?;
            let kl = kl_divergence(&truth, &fitted)?;
            result.kl = Some(kl.is_finite().then_some(kl));
            result.kl_infinite = Some(!kl.is_finite());
        }
        (None, None) => {}
        _ => return Err(Error::invalid("--truth and --model must be given together")),
    }
    if result.cv.is_none() && result.kl.is_none() {
        return Err(Error::invalid("nothing to evaluate: pass --data and/or --truth with --model"));
    }
    let text = serde_json::to_string_pretty(&result)? + "\n";
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => write!(out, "{text}")?,
    }
    Ok(())
}
