//! Linearized ADMM solver.
//!
//! Only two loading copies are kept: the orthonormal `V` and the sparse
//! `V₀`, which also sits inside the regression loss. The coupled `V₀`
//! subproblem is replaced by a majorized quadratic: the regression loss is
//! expanded around the current `V₀` with curvature bound `ν`, the largest
//! eigenvalue of `ββᵀ ⊗ XᵀX`, which turns the update into one gradient step
//! followed by soft-thresholding.

use crate::error::{Result, SpcrError};
use crate::kernels::{procrustes_orthogonalize, soft_threshold_mat, soft_threshold_vec, Mat, Vector};
use crate::model::{Algorithm, CandidatePoint, ConvergenceReport, Dataset, FitConfig, Residuals, SpcrsvdModel};
use crate::solver::{coefficient_step, intercept_step, max_norm, record, threshold, warm_start_loadings, Design};

/// Lower bound on ν so the step stays finite when β = 0.
pub const NU_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LadmmState {
    pub v: Mat,
    pub v0: Mat,
    pub z: Mat,
    pub beta: Vector,
    pub beta0_vec: Vector,
    pub intercept: f64,
    /// Scaled dual of `V₀ − V = 0`.
    pub lambda: Mat,
    /// Scaled dual of `β − β₀ = 0`.
    pub lambda_vec: Vector,
    pub nu: f64,
    pub iter: usize,
}

pub fn initialize(d: &Dataset, cfg: &FitConfig) -> Result<LadmmState> {
    cfg.validate(d.n(), d.p())?;
    let (p, k) = (d.p(), cfg.k);
    let v = warm_start_loadings(d, k)?;
    Ok(LadmmState {
        z: d.x() * &v,
        v0: v.clone(),
        v,
        beta: Vector::zeros(k),
        beta0_vec: Vector::zeros(k),
        intercept: d.y().mean(),
        lambda: Mat::zeros(p, k),
        lambda_vec: Vector::zeros(k),
        nu: NU_FLOOR,
        iter: 0,
    })
}

/// `V = PQᵀ` for `(w/n)XᵀZ + (ρ₁/2)(V₀ + Λ) = PΩQᵀ`.
pub fn update_v_ladmm(s: &LadmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<Mat> {
    let m = design.xt_times(&s.z) * cfg.w + (&s.v0 + &s.lambda) * (cfg.rho1 / 2.0);
    procrustes_orthogonalize(&m)
}

/// Largest eigenvalue of `ββᵀ ⊗ XᵀX`, i.e. `‖β‖² λ_max(XᵀX)`; the
/// Kronecker product is never formed. Not floored.
pub fn compute_nu(beta: &Vector, design: &Design<'_>) -> f64 {
    beta.norm_squared() * design.xtx_max_eig
}

/// The matrix whose soft-threshold is the new `V₀`:
///
/// ```text
/// (2n / (2ν + nρ₁)) { (1/n)(Xᵀy*βᵀ − XᵀX V₀ ββᵀ) + (ν/n) V₀ − (ρ₁/2)(Λ − V) }
/// ```
pub fn step_matrix(s: &LadmmState, design: &Design<'_>, cfg: &FitConfig, nu: f64) -> Mat {
    let n = design.n;
    let bt = s.beta.transpose();
    let grad_part = design.xty_centered(s.intercept) * &bt - &design.gram * (&s.v0 * &s.beta) * &bt;
    let inner = grad_part + &s.v0 * (nu / n) - (&s.lambda - &s.v) * (cfg.rho1 / 2.0);
    inner * (2.0 * n / (2.0 * nu + n * cfg.rho1))
}

/// Linearized `V₀` step using `s.nu` as the curvature constant.
pub fn update_v0_ladmm(s: &LadmmState, design: &Design<'_>, cfg: &FitConfig) -> Mat {
    let n = design.n;
    let step = step_matrix(s, design, cfg, s.nu);
    soft_threshold_mat(&step, n * cfg.lambda_v / (2.0 * s.nu + n * cfg.rho1))
}

pub fn update_z(s: &LadmmState, design: &Design<'_>) -> Mat {
    design.x() * &s.v
}

pub fn update_beta(s: &LadmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<Vector> {
    coefficient_step(design, &s.v0, s.intercept, &s.beta0_vec, &s.lambda_vec, cfg.rho2)
}

pub fn update_beta0_vec(s: &LadmmState, cfg: &FitConfig) -> Vector {
    soft_threshold_vec(&(&s.beta + &s.lambda_vec), cfg.lambda_beta / cfg.rho2)
}

pub fn update_intercept(s: &LadmmState, design: &Design<'_>) -> f64 {
    intercept_step(design, &s.v0, &s.beta)
}

pub fn update_duals(s: &LadmmState) -> (Mat, Vector) {
    (&s.lambda + (&s.v0 - &s.v), &s.lambda_vec + (&s.beta - &s.beta0_vec))
}

/// One sweep `V → V₀ → Z → β → β₀ → intercept → duals`. Returns `true` when
/// the Procrustes step was degenerate and `V` was kept.
pub fn sweep(s: &mut LadmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<bool> {
    let degenerate = match update_v_ladmm(s, design, cfg) {
        Ok(v) => {
            s.v = v;
            false
        }
        Err(SpcrError::RankDeficient { .. }) => true,
        Err(e) => return Err(e),
    };
    s.nu = compute_nu(&s.beta, design).max(NU_FLOOR);
    s.v0 = update_v0_ladmm(s, design, cfg);
    s.z = update_z(s, design);
    s.beta = update_beta(s, design, cfg)?;
    s.beta0_vec = update_beta0_vec(s, cfg);
    s.intercept = update_intercept(s, design);
    let (l, lv) = update_duals(s);
    s.lambda = l;
    s.lambda_vec = lv;
    s.iter += 1;
    Ok(degenerate)
}

pub fn residuals(s: &LadmmState, prev_v0: &Mat, prev_beta0: &Vector, cfg: &FitConfig) -> Residuals {
    let (p, k) = s.v.shape();
    Residuals {
        primal_loadings: (&s.v0 - &s.v).norm(),
        primal_coefficients: (&s.beta - &s.beta0_vec).norm(),
        dual_loadings: cfg.rho1 * (&s.v0 - prev_v0).norm(),
        dual_coefficients: cfg.rho2 * (&s.beta0_vec - prev_beta0).norm(),
        eps_pri_loadings: threshold(p * k, cfg.tol_abs, cfg.tol_rel, max_norm(&[s.v.norm(), s.v0.norm()])),
        eps_pri_coefficients: threshold(
            k,
            cfg.tol_abs,
            cfg.tol_rel,
            max_norm(&[s.beta.norm(), s.beta0_vec.norm()]),
        ),
        eps_dual_loadings: threshold(p * k, cfg.tol_abs, cfg.tol_rel, cfg.rho1 * s.lambda.norm()),
        eps_dual_coefficients: threshold(k, cfg.tol_abs, cfg.tol_rel, cfg.rho2 * s.lambda_vec.norm()),
    }
}

fn state_objective(s: &LadmmState, d: &Dataset, cfg: &FitConfig) -> Result<f64> {
    crate::model::objective(
        d,
        &CandidatePoint {
            intercept: s.intercept,
            beta: &s.beta0_vec,
            z: &s.z,
            v: &s.v0,
        },
        cfg,
    )
}

#[derive(Debug, Clone)]
pub struct LadmmRun {
    pub state: LadmmState,
    pub report: ConvergenceReport,
}

pub fn run_from(d: &Dataset, cfg: &FitConfig, mut state: LadmmState) -> Result<LadmmRun> {
    cfg.validate(d.n(), d.p())?;
    let design = Design::new(d);
    let mut report = ConvergenceReport::default();
    for _ in 0..cfg.max_iter {
        let prev_v0 = state.v0.clone();
        let prev_b0 = state.beta0_vec.clone();
        if sweep(&mut state, &design, cfg)? {
            report.degenerate_iterates += 1;
        }
        let r = residuals(&state, &prev_v0, &prev_b0, cfg);
        record(&mut report, &r, state_objective(&state, d, cfg)?);
        report.iterations += 1;
        report.final_residuals = r;
        if r.satisfied() {
            report.converged = true;
            break;
        }
    }
    Ok(LadmmRun { state, report })
}

pub fn solve_ladmm(d: &Dataset, cfg: &FitConfig) -> Result<LadmmRun> {
    let state = initialize(d, cfg)?;
    run_from(d, cfg, state)
}

pub fn fit_ladmm(d: &Dataset, cfg: &FitConfig) -> Result<SpcrsvdModel> {
    let run = solve_ladmm(d, cfg)?;
    let s = run.state;
    Ok(SpcrsvdModel {
        algorithm: Algorithm::Ladmm,
        intercept: s.intercept,
        composite_coefficients: &s.v0 * &s.beta0_vec,
        beta: s.beta,
        beta_sparse: s.beta0_vec,
        loadings: s.v,
        regression_loadings: s.v0.clone(),
        sparse_loadings: s.v0,
        scores: s.z,
        transform: d.transform().clone(),
        config: FitConfig {
            algorithm: Algorithm::Ladmm,
            ..cfg.clone()
        },
        diagnostics: run.report,
    })
}
