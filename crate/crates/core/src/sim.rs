//! Monte Carlo designs and the replicated experiment runner.
//!
//! Five generative designs with Gaussian covariates `x ~ N(0, Σ)` and
//! `y = ζᵀx + ε`, `ε ~ N(0, σ²)`:
//!
//! | case | p  | Σ                                   | ζ                                     |
//! |------|----|-------------------------------------|---------------------------------------|
//! | 1    | 10 | I                                   | (2, 1, 0, …)                          |
//! | 2    | 10 | diag(1, 9, 1, …)                    | (8, 1, 0, …)                          |
//! | 3    | 20 | blockdiag(AR₉(0.9), I₁₁)            | 4·(ν, 0, …)                           |
//! | 4    | 30 | blockdiag(AR₉(0.9), AR₆(0.9), I₁₅)  | 4·(ν, 0…) + 4·(0₉, (1,1,1,1,1,1), 0…) |
//! | 5    | 30 | as case 4                           | as case 4 with (1,0,−1,−1,0,1)        |
//!
//! with `ν = (−1, 0, 1, 1, 0, −1, −1, 0, 1)` and `AR_m(r)_{ij} = r^{|i−j|}`.

use std::fmt::Write as _;

use nalgebra::Cholesky;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::baselines::{select_components, BaselineKind};
use crate::error::{Result, SpcrError};
use crate::kernels::{Mat, Vector};
use crate::model::{preprocess, Algorithm, FitConfig};
use crate::selection::{cross_validate, mse, tpr_tnr, CvPlan, DEFAULT_ZERO_TOL};

const NU: [f64; 9] = [-1.0, 0.0, 1.0, 1.0, 0.0, -1.0, -1.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub case_id: u32,
    pub n: usize,
    pub sigma: f64,
    pub p: usize,
    pub covariance: Mat,
    /// True per-covariate coefficients, scalar multipliers folded in.
    pub zeta: Vector,
}

fn ar_block(m: &mut Mat, start: usize, size: usize, r: f64) {
    for i in 0..size {
        for j in 0..size {
            m[(start + i, start + j)] = r.powi((i as i32 - j as i32).abs());
        }
    }
}

impl SimDesign {
    pub fn case(case_id: u32, n: usize, sigma: f64) -> Result<SimDesign> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(SpcrError::InvalidConfig(format!("sigma = {sigma} must be nonnegative")));
        }
        let (p, covariance, zeta) = match case_id {
            1 | 2 => {
                let mut cov = Mat::identity(10, 10);
                let mut zeta = Vector::zeros(10);
                if case_id == 1 {
                    zeta[0] = 2.0;
                } else {
                    zeta[0] = 8.0;
                    cov[(1, 1)] = 9.0;
                }
                zeta[1] = 1.0;
                (10, cov, zeta)
            }
            3 => {
                let mut cov = Mat::identity(20, 20);
                ar_block(&mut cov, 0, 9, 0.9);
                let mut zeta = Vector::zeros(20);
                for (j, v) in NU.iter().enumerate() {
                    zeta[j] = 4.0 * v;
                }
                (20, cov, zeta)
            }
            4 | 5 => {
                let mut cov = Mat::identity(30, 30);
                ar_block(&mut cov, 0, 9, 0.9);
                ar_block(&mut cov, 9, 6, 0.9);
                let nu2: [f64; 6] = if case_id == 4 {
                    [1.0; 6]
                } else {
                    [1.0, 0.0, -1.0, -1.0, 0.0, 1.0]
                };
                let mut zeta = Vector::zeros(30);
                for (j, v) in NU.iter().enumerate() {
                    zeta[j] = 4.0 * v;
                }
                for (j, v) in nu2.iter().enumerate() {
                    zeta[9 + j] = 4.0 * v;
                }
                (30, cov, zeta)
            }
            other => return Err(SpcrError::InvalidCase(other)),
        };
        Ok(SimDesign {
            case_id,
            n,
            sigma,
            p,
            covariance,
            zeta,
        })
    }
}

/// Raw draws from a design.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Mat,
    pub y: Vector,
}

/// Draws `n` rows: `X = G Lᵀ` with `LLᵀ = Σ`, then `y = Xζ + σε`.
pub fn generate<R: Rng + ?Sized>(design: &SimDesign, n: usize, rng: &mut R) -> Result<Sample> {
    let chol = Cholesky::new(design.covariance.clone()).ok_or(SpcrError::NotPositiveDefinite)?;
    let l = chol.l();
    let p = design.p;
    let mut g = Mat::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            g[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let x = g * l.transpose();
    let mut y = &x * &design.zeta;
    for yi in y.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *yi += design.sigma * e;
    }
    Ok(Sample { x, y })
}

/// [`generate`] with a fresh generator seeded from `seed`.
pub fn generate_seeded(design: &SimDesign, n: usize, seed: u64) -> Result<Sample> {
    generate(design, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    SpcrsvdLadmm,
    SpcrsvdAdmm,
    Pls,
    Pcr,
    /// Predicts with the generating coefficients; its MSE estimates σ².
    TrueModel,
}

impl Method {
    pub const TABLE: [Method; 4] = [Method::SpcrsvdLadmm, Method::SpcrsvdAdmm, Method::Pls, Method::Pcr];

    pub fn label(self) -> &'static str {
        match self {
            Method::SpcrsvdLadmm => "SPCRsvd-LADMM",
            Method::SpcrsvdAdmm => "SPCRsvd-ADMM",
            Method::Pls => "PLS",
            Method::Pcr => "PCR",
            Method::TrueModel => "true-model",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = SpcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ladmm" | "spcrsvd-ladmm" => Ok(Method::SpcrsvdLadmm),
            "admm" | "spcrsvd-admm" => Ok(Method::SpcrsvdAdmm),
            "pls" => Ok(Method::Pls),
            "pcr" => Ok(Method::Pcr),
            "true" | "true-model" => Ok(Method::TrueModel),
            other => Err(SpcrError::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// Knobs for [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub w: f64,
    pub reps: usize,
    pub n_test: usize,
    /// Points per axis of the `(λ_V, λ_β)` grid.
    pub grid_size: usize,
    pub spcr_folds: usize,
    pub baseline_folds: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 1,
            w: 0.1,
            reps: 20,
            n_test: 1000,
            grid_size: 5,
            spcr_folds: 5,
            baseline_folds: 10,
            seed: 0,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub case_id: u32,
    pub sigma: f64,
    pub n: usize,
    pub k: usize,
    pub method: Method,
    pub rep: usize,
    pub mse: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, sd })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mse: Summary,
    pub tpr: Option<Summary>,
    pub tnr: Option<Summary>,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub case_id: u32,
    pub p: usize,
    pub n: usize,
    pub sigma: f64,
    pub k: usize,
    pub reps: usize,
    pub n_test: usize,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicateRecord>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// One row per (method, replicate).
    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("case,sigma,n,k,method,rep,mse,tpr,tnr\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.case_id,
                r.sigma,
                r.n,
                r.k,
                r.method.label(),
                r.rep,
                r.mse,
                opt(r.tpr),
                opt(r.tnr)
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "case,p,sigma,n,k,method,reps,n_test,mse_mean,mse_sd,tpr_mean,tpr_sd,tnr_mean,tnr_sd,not_converged\n",
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.case_id,
                self.p,
                self.sigma,
                self.n,
                self.k,
                s.method.label(),
                self.reps,
                self.n_test,
                s.mse.mean,
                s.mse.sd,
                opt(s.tpr.map(|t| t.mean)),
                opt(s.tpr.map(|t| t.sd)),
                opt(s.tnr.map(|t| t.mean)),
                opt(s.tnr.map(|t| t.sd)),
                s.not_converged
            );
        }
        out
    }

    /// Text table: mean with standard deviation in parentheses.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Case {} (p = {}): sigma = {}, n = {}, k = {}, replicates = {}, test size = {}",
            self.case_id, self.p, self.sigma, self.n, self.k, self.reps, self.n_test
        );
        let _ = writeln!(out, "{:<15} {:>18} {:>18} {:>18}", "method", "MSE", "TPR", "TNR");
        let cell = |s: Option<Summary>| match s {
            Some(s) => format!("{:.3} ({:.3})", s.mean, s.sd),
            None => "-".to_string(),
        };
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<15} {:>18} {:>18} {:>18}",
                s.method.label(),
                cell(Some(s.mse)),
                cell(s.tpr),
                cell(s.tnr)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Generator for replicate `rep`: the master seed picks the key, the
/// replicate index the stream.
pub fn replicate_rng(master_seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep as u64);
    rng
}

fn run_replicate(
    design: &SimDesign,
    methods: &[Method],
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<Vec<ReplicateRecord>> {
    let mut rng = replicate_rng(cfg.seed, rep);
    let train = generate(design, design.n, &mut rng)?;
    let test = generate(design, cfg.n_test, &mut rng)?;
    let fold_seed = rng.next_u64();
    let d = preprocess(&train.x, &train.y, false)?;

    let mut records = Vec::with_capacity(methods.len());
    for &method in methods {
        let (pred, support, converged) = match method {
            Method::SpcrsvdAdmm | Method::SpcrsvdLadmm => {
                let algorithm = if method == Method::SpcrsvdAdmm {
                    Algorithm::Admm
                } else {
                    Algorithm::Ladmm
                };
                let fit_cfg = FitConfig {
                    k: cfg.k,
                    w: cfg.w,
                    max_iter: cfg.max_iter,
                    algorithm,
                    seed: fold_seed,
                    ..FitConfig::default()
                };
                let plan = CvPlan::with_default_grid(&d, cfg.spcr_folds, cfg.grid_size, fold_seed)?;
                let cv = cross_validate(&d, &fit_cfg, &plan)?;
                let model = cv.refit_model;
                let support = tpr_tnr(&model.composite_coefficients, &design.zeta, DEFAULT_ZERO_TOL)?;
                (model.predict(&test.x)?, Some(support), model.diagnostics.converged)
            }
            Method::Pls | Method::Pcr => {
                let kind = if method == Method::Pls {
                    BaselineKind::Pls
                } else {
                    BaselineKind::Pcr
                };
                let k_max = cfg.k.min(design.p).min(design.n.saturating_sub(2).max(1));
                let (model, _) = select_components(&d, kind, k_max, cfg.baseline_folds, fold_seed)?;
                (model.predict(&test.x)?, None, true)
            }
            Method::TrueModel => (&test.x * &design.zeta, None, true),
        };
        records.push(ReplicateRecord {
            case_id: design.case_id,
            sigma: design.sigma,
            n: design.n,
            k: cfg.k,
            method,
            rep,
            mse: mse(&test.y, &pred)?,
            tpr: support.and_then(|s| s.tpr),
            tnr: support.and_then(|s| s.tnr),
            converged,
        });
    }
    Ok(records)
}

/// Runs `cfg.reps` independent replicates (in parallel) and aggregates
/// per-method means and standard deviations. Solver non-convergence is
/// counted, not fatal.
pub fn run_experiment(design: &SimDesign, methods: &[Method], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.reps == 0 {
        return Err(SpcrError::InvalidConfig("at least one replicate is required".into()));
    }
    if cfg.n_test == 0 || methods.is_empty() {
        return Err(SpcrError::InvalidConfig("need a test set and at least one method".into()));
    }
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_replicate(design, methods, cfg, rep))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summaries = aggregate(&records, methods);

    let mut warnings = Vec::new();
    if cfg.reps == 1 {
        warnings.push("single replicate: standard deviations reported as 0".to_string());
    }
    let floor = design.sigma.powi(2) * (1.0 - 3.0 / (cfg.n_test as f64).sqrt());
    for s in &summaries {
        if s.mse.mean < floor {
            warnings.push(format!(
                "{} mean MSE {:.4} is below the noise floor {:.4}",
                s.method.label(),
                s.mse.mean,
                floor
            ));
        }
        if s.not_converged > 0 {
            warnings.push(format!(
                "{}: {} of {} final fits hit the iteration cap",
                s.method.label(),
                s.not_converged,
                cfg.reps
            ));
        }
    }
    Ok(ExperimentReport {
        case_id: design.case_id,
        p: design.p,
        n: design.n,
        sigma: design.sigma,
        k: cfg.k,
        reps: cfg.reps,
        n_test: cfg.n_test,
        summaries,
        records,
        warnings,
    })
}

/// Per-method summaries from replicate records, in `methods` order.
pub fn aggregate(records: &[ReplicateRecord], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .filter_map(|&m| {
            let rs: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == m).collect();
            let mses: Vec<f64> = rs.iter().map(|r| r.mse).collect();
            let tprs: Vec<f64> = rs.iter().filter_map(|r| r.tpr).collect();
            let tnrs: Vec<f64> = rs.iter().filter_map(|r| r.tnr).collect();
            Some(MethodSummary {
                method: m,
                mse: summarize(&mses)?,
                tpr: summarize(&tprs),
                tnr: summarize(&tnrs),
                not_converged: rs.iter().filter(|r| !r.converged).count(),
            })
        })
        .collect()
}
