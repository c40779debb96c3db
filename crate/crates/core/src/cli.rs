//! Command-line front end: `fit`, `predict`, `cv` and `simulate`.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 CSV parse
//! error, 4 dimension mismatch, 5 solver hit the iteration cap (outputs are
//! still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::SpcrError;
use crate::io::{load_model, read_csv_path, save_model, select_columns, split_target, ModelFile};
use crate::model::{preprocess, Algorithm, FitConfig, SpcrsvdModel};
use crate::selection::{cross_validate, default_grid, mse, CvPlan, CvResult};
use crate::sim::{run_experiment, ExperimentConfig, Method, SimDesign};
use crate::solver::fit;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_DIMENSION: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "spcrsvd", version, about = "Sparse principal component regression (SVD-based PCA loss)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at fixed regularization parameters and write a model file.
    Fit(FitCmd),
    /// Predict from a saved model.
    Predict(PredictCmd),
    /// Select (λ_V, λ_β) by K-fold cross-validation and write the refit model.
    Cv(CvCmd),
    /// Run a Monte Carlo design and report MSE/TPR/TNR tables.
    Simulate(SimulateCmd),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Response column name.
    #[arg(long)]
    pub target: String,
    /// Columns to exclude from the covariates (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// Scale covariates to unit standard deviation after centering.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "admm")]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub w: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_v: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_beta: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    /// CSV containing the model's covariate columns.
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Prediction CSV to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// λ_V grid (comma separated); defaults to a data-driven log grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// λ_β grid; defaults to the λ_V grid.
    #[arg(long, value_delimiter = ',')]
    pub grid_beta: Vec<f64>,
    /// Points per axis of the default grid.
    #[arg(long, default_value_t = 10)]
    pub grid_size: usize,
    /// CV-surface CSV to write (printed to standard output if omitted).
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Refit model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[arg(long)]
    pub case: u32,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub w: f64,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 5)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Methods to run (ladmm, admm, pls, pcr, true).
    #[arg(long, value_delimiter = ',', default_value = "ladmm,admm,pls,pcr")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: writes `<out>_replicates.csv` and `<out>_summary.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to its exit code.
pub fn exit_code(e: &SpcrError) -> i32 {
    match e {
        SpcrError::Parse { .. } => EXIT_PARSE,
        SpcrError::DimensionMismatch(_) => EXIT_DIMENSION,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(c) => cmd_fit(c, out),
        Command::Predict(c) => cmd_predict(c, out),
        Command::Cv(c) => cmd_cv(c, out),
        Command::Simulate(c) => cmd_simulate(c, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

type CmdResult = Result<i32, SpcrError>;

fn io_err(path: &Path, e: std::io::Error) -> SpcrError {
    SpcrError::Io(format!("{}: {e}", path.display()))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), SpcrError> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn base_config(s: &SolverArgs) -> FitConfig {
    FitConfig {
        k: s.k,
        w: s.w,
        max_iter: s.max_iter,
        algorithm: s.algorithm,
        seed: s.seed,
        ..FitConfig::default()
    }
}

fn fit_summary(model: &SpcrsvdModel, objective: f64, train_mse: f64) -> String {
    let mut s = String::new();
    let d = &model.diagnostics;
    let _ = writeln!(s, "algorithm: {}", model.algorithm.as_str());
    let _ = writeln!(s, "lambda_v: {}", model.config.lambda_v);
    let _ = writeln!(s, "lambda_beta: {}", model.config.lambda_beta);
    let _ = writeln!(s, "objective: {objective}");
    let _ = writeln!(s, "iterations: {}", d.iterations);
    let _ = writeln!(s, "converged: {}", d.converged);
    let _ = writeln!(s, "nonzero loadings: {} of {}", model.nonzero_loadings(), model.sparse_loadings.len());
    let _ = writeln!(s, "nonzero coefficients: {} of {}", model.nonzero_coefficients(), model.k());
    let _ = writeln!(s, "training mse: {train_mse}");
    s
}

fn converged_code(model: &SpcrsvdModel) -> i32 {
    if model.diagnostics.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn cmd_fit(c: &FitCmd, out: &mut dyn Write) -> CmdResult {
    let table = read_csv_path(&c.data.input)?;
    let design = split_target(&table, &c.data.target, &c.data.drop)?;
    let d = preprocess(&design.x, &design.y, c.data.standardize)?;
    let cfg = base_config(&c.solver).with_lambdas(c.lambda_v, c.lambda_beta);
    let model = fit(&d, &cfg)?;
    let train_mse = mse(&design.y, &model.predict(&design.x)?)?;
    let summary = fit_summary(&model, model.objective(&d)?, train_mse);
    let code = converged_code(&model);
    save_model(
        &ModelFile {
            model,
            target: design.target,
            covariates: design.covariates,
        },
        &c.out,
    )?;
    emit(out, &summary)?;
    Ok(code)
}

fn cmd_predict(c: &PredictCmd, out: &mut dyn Write) -> CmdResult {
    let file = load_model(&c.model)?;
    let table = read_csv_path(&c.input)?;
    let x = select_columns(&table, &file.covariates)
        .map_err(|e| SpcrError::DimensionMismatch(format!("input lacks model covariates: {e}")))?;
    let pred = file.model.predict(&x)?;
    let mut csv = String::from("prediction\n");
    for v in pred.iter() {
        let _ = writeln!(csv, "{v}");
    }
    match &c.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| io_err(path, e))?,
        None => emit(out, &csv)?,
    }
    if let Some(t) = table.headers.iter().position(|h| *h == file.target) {
        let y = table.data.column(t).into_owned();
        emit(out, &format!("mse: {}\n", mse(&y, &pred)?))?;
    }
    Ok(EXIT_OK)
}

/// Grid surface as CSV: one row per `(λ_V, λ_β)` point.
pub fn surface_csv(cv: &CvResult) -> String {
    let mut s = String::from("lambda_v,lambda_beta,cv,converged_folds\n");
    for (i, lv) in cv.grid_lambda_v.iter().enumerate() {
        for (j, lb) in cv.grid_lambda_beta.iter().enumerate() {
            let _ = writeln!(s, "{lv},{lb},{},{}", cv.cv_surface[(i, j)], cv.converged_folds[i][j]);
        }
    }
    s
}

fn cmd_cv(c: &CvCmd, out: &mut dyn Write) -> CmdResult {
    let table = read_csv_path(&c.data.input)?;
    let design = split_target(&table, &c.data.target, &c.data.drop)?;
    let d = preprocess(&design.x, &design.y, c.data.standardize)?;
    let grid_v = if c.grid.is_empty() {
        default_grid(&d, c.grid_size)
    } else {
        c.grid.clone()
    };
    let grid_b = if c.grid_beta.is_empty() {
        grid_v.clone()
    } else {
        c.grid_beta.clone()
    };
    let plan = CvPlan::new(d.n(), c.folds, grid_v, grid_b, c.solver.seed)?;
    let cfg = base_config(&c.solver);
    let cv = cross_validate(&d, &cfg, &plan)?;

    let surface = surface_csv(&cv);
    match &c.surface {
        Some(path) => std::fs::write(path, &surface).map_err(|e| io_err(path, e))?,
        None => emit(out, &surface)?,
    }
    let model = cv.refit_model;
    let train_mse = mse(&design.y, &model.predict(&design.x)?)?;
    let mut summary = format!(
        "selected lambda_v: {}\nselected lambda_beta: {}\nnonconverged fold fits: {}\n",
        cv.best_lambda_v, cv.best_lambda_beta, cv.nonconverged_fits
    );
    summary.push_str(&fit_summary(&model, model.objective(&d)?, train_mse));
    let code = converged_code(&model);
    save_model(
        &ModelFile {
            model,
            target: design.target,
            covariates: design.covariates,
        },
        &c.out,
    )?;
    emit(out, &summary)?;
    Ok(code)
}

fn cmd_simulate(c: &SimulateCmd, out: &mut dyn Write) -> CmdResult {
    let design = SimDesign::case(c.case, c.n, c.sigma)?;
    let cfg = ExperimentConfig {
        k: c.k,
        w: c.w,
        reps: c.reps,
        n_test: c.n_test,
        grid_size: c.grid_size,
        seed: c.seed,
        max_iter: c.max_iter,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&design, &c.methods, &cfg)?;
    if let Some(prefix) = &c.out {
        let with_suffix = |suffix: &str| {
            let mut name = prefix.as_os_str().to_owned();
            name.push(suffix);
            PathBuf::from(name)
        };
        let (reps_path, summary_path) = (with_suffix("_replicates.csv"), with_suffix("_summary.csv"));
        std::fs::write(&reps_path, report.replicates_csv()).map_err(|e| io_err(&reps_path, e))?;
        std::fs::write(&summary_path, report.summary_csv()).map_err(|e| io_err(&summary_path, e))?;
    }
    emit(out, &report.render_table())?;
    Ok(EXIT_OK)
}
