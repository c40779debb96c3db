//! Pieces shared by the ADMM and linearized-ADMM solvers.

use crate::admm;
use crate::error::{Result, SpcrError};
use crate::kernels::{max_eigenvalue_sym, solve_spd_vec, thin_svd, Mat, Vector, RANK_CUTOFF};
use crate::ladmm;
use crate::model::{Algorithm, Dataset, FitConfig, Residuals, SpcrsvdModel};

/// Per-dataset quantities reused by every sweep.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    pub data: &'a Dataset,
    pub n: f64,
    /// `XᵀX / n`.
    pub gram: Mat,
    /// `Xᵀy / n`.
    pub xty: Vector,
    /// `Xᵀ1 / n` (zero for a centered design).
    pub col_mean: Vector,
    pub y_mean: f64,
    /// Largest eigenvalue of `XᵀX`.
    pub xtx_max_eig: f64,
}

impl<'a> Design<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let x = data.x();
        let n = data.n() as f64;
        let gram = (x.transpose() * x) / n;
        let xty = (x.transpose() * data.y()) / n;
        let col_mean = x.row_mean().transpose();
        let xtx_max_eig = n * max_eigenvalue_sym(&gram).max(0.0);
        Design {
            data,
            n,
            gram,
            xty,
            col_mean,
            y_mean: data.y().mean(),
            xtx_max_eig,
        }
    }

    pub fn x(&self) -> &Mat {
        self.data.x()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    /// `Xᵀ(y − β₀1) / n`.
    pub fn xty_centered(&self, intercept: f64) -> Vector {
        &self.xty - &self.col_mean * intercept
    }

    /// `Xᵀ Z / n`.
    pub fn xt_times(&self, z: &Mat) -> Mat {
        (self.x().transpose() * z) / self.n
    }
}

/// SVD warm start: top-k right singular vectors of X.
pub(crate) fn warm_start_loadings(d: &Dataset, k: usize) -> Result<Mat> {
    let svd = thin_svd(d.x())?;
    let smax = svd.s.iter().copied().fold(0.0, f64::max);
    if svd.s.len() < k || svd.s[k - 1] < RANK_CUTOFF * smax.max(1.0) {
        let min = if svd.s.len() < k { 0.0 } else { svd.s[k - 1] };
        return Err(SpcrError::RankDeficient {
            min_singular_value: min,
        });
    }
    Ok(svd.right_vectors(k))
}

/// Minimizer of `(1/n)‖y − β₀1 − XLβ‖² + (ρ/2)‖β − β₀ + λ‖²` over β.
pub(crate) fn coefficient_step(
    design: &Design<'_>,
    loadings: &Mat,
    intercept: f64,
    beta_sparse: &Vector,
    dual: &Vector,
    rho: f64,
) -> Result<Vector> {
    let k = loadings.ncols();
    let lhs = loadings.transpose() * &design.gram * loadings + Mat::identity(k, k) * (rho / 2.0);
    let rhs = loadings.transpose() * design.xty_centered(intercept) + (beta_sparse - dual) * (rho / 2.0);
    solve_spd_vec(&lhs, &rhs)
}

/// `(1/n) 1ᵀ(y − XLβ)`.
pub(crate) fn intercept_step(design: &Design<'_>, loadings: &Mat, beta: &Vector) -> f64 {
    design.y_mean - design.col_mean.dot(&(loadings * beta))
}

/// Absolute/relative stopping thresholds for one constraint group.
pub(crate) fn threshold(dim: usize, tol_abs: f64, tol_rel: f64, scale: f64) -> f64 {
    (dim as f64).sqrt() * tol_abs + tol_rel * scale
}

pub(crate) fn max_norm(ms: &[f64]) -> f64 {
    ms.iter().copied().fold(0.0, f64::max)
}

/// Fits with the algorithm named in `cfg`.
pub fn fit(d: &Dataset, cfg: &FitConfig) -> Result<SpcrsvdModel> {
    match cfg.algorithm {
        Algorithm::Admm => admm::fit_admm(d, cfg),
        Algorithm::Ladmm => ladmm::fit_ladmm(d, cfg),
    }
}

pub(crate) fn record(report: &mut crate::model::ConvergenceReport, r: &Residuals, objective: f64) {
    report.primal_residuals.push(r.primal_norm());
    report.dual_residuals.push(r.dual_norm());
    report.objective_trace.push(objective);
}
