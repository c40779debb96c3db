//! Dataset, configuration and fitted-model types shared by both solvers,
//! plus the SPCRsvd objective.
//!
//! The objective minimized over `(β₀, β, Z, V)` with `VᵀV = I_k` is
//!
//! ```text
//! (1/n)‖y − β₀1 − XVβ‖² + (w/n)‖X − ZVᵀ‖²_F + λ_V‖V‖₁ + λ_β‖β‖₁
//! ```

use crate::error::{Result, SpcrError};
use crate::kernels::{ensure_finite_mat, ensure_finite_vec, Mat, Vector};

/// Column-wise affine map `x ↦ (x − mean) / scale` learned at preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub means: Vector,
    pub scales: Vector,
    pub standardized: bool,
}

impl Transform {
    pub fn identity(p: usize) -> Self {
        Transform {
            means: Vector::zeros(p),
            scales: Vector::from_element(p, 1.0),
            standardized: false,
        }
    }

    pub fn p(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, raw: &Mat) -> Result<Mat> {
        if raw.ncols() != self.p() {
            return Err(SpcrError::DimensionMismatch(format!(
                "expected {} covariate columns, got {}",
                self.p(),
                raw.ncols()
            )));
        }
        ensure_finite_mat(raw, "covariates")?;
        let mut out = raw.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|x| *x = (*x - m) / s);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetWarning {
    /// Column has zero variance; it is centered to zero and its scale left at 1.
    DegenerateColumn(usize),
}

/// A centered (optionally standardized) design matrix with its response.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Mat,
    y: Vector,
    raw_x: Mat,
    transform: Transform,
    y_mean: f64,
    warnings: Vec<DatasetWarning>,
}

/// Centers each column of `raw_x`, optionally scaling to unit sample standard
/// deviation. The response is left untouched; the fitted intercept absorbs
/// its mean.
pub fn preprocess(raw_x: &Mat, raw_y: &Vector, standardize: bool) -> Result<Dataset> {
    let (n, p) = raw_x.shape();
    if n != raw_y.len() {
        return Err(SpcrError::DimensionMismatch(format!(
            "X has {n} rows but y has {} entries",
            raw_y.len()
        )));
    }
    if n < 2 || p < 1 {
        return Err(SpcrError::DimensionMismatch(format!(
            "need n >= 2 and p >= 1, got n = {n}, p = {p}"
        )));
    }
    ensure_finite_mat(raw_x, "covariates")?;
    ensure_finite_vec(raw_y, "response")?;

    let mut means = Vector::zeros(p);
    let mut scales = Vector::from_element(p, 1.0);
    let mut warnings = Vec::new();
    for (j, col) in raw_x.column_iter().enumerate() {
        let mean = col.mean();
        means[j] = mean;
        let ss: f64 = col.iter().map(|x| (x - mean).powi(2)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        // relative test so that a constant column with round-off is still constant
        let degenerate = sd <= 1e-12 * mean.abs().max(1e-300) || sd == 0.0;
        if degenerate {
            warnings.push(DatasetWarning::DegenerateColumn(j));
        } else if standardize {
            scales[j] = sd;
        }
    }
    let transform = Transform {
        means,
        scales,
        standardized: standardize,
    };
    let mut x = transform.apply(raw_x)?;
    for w in &warnings {
        let DatasetWarning::DegenerateColumn(j) = *w;
        x.column_mut(j).fill(0.0);
    }
    Ok(Dataset {
        x,
        y: raw_y.clone(),
        raw_x: raw_x.clone(),
        transform,
        y_mean: raw_y.mean(),
        warnings,
    })
}

impl Dataset {
    /// Uses `x` as given (identity transform, no centering). Intended for
    /// fixtures that exercise the solver on an uncentered design.
    pub fn from_processed(x: Mat, y: Vector) -> Result<Dataset> {
        let (n, p) = x.shape();
        if n != y.len() {
            return Err(SpcrError::DimensionMismatch(format!(
                "X has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if n < 2 || p < 1 {
            return Err(SpcrError::DimensionMismatch(format!(
                "need n >= 2 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        ensure_finite_mat(&x, "covariates")?;
        ensure_finite_vec(&y, "response")?;
        Ok(Dataset {
            raw_x: x.clone(),
            y_mean: y.mean(),
            transform: Transform::identity(p),
            x,
            y,
            warnings: Vec::new(),
        })
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn raw_x(&self) -> &Mat {
        &self.raw_x
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn column_means(&self) -> &Vector {
        &self.transform.means
    }

    pub fn column_scales(&self) -> &Vector {
        &self.transform.scales
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn warnings(&self) -> &[DatasetWarning] {
        &self.warnings
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Re-preprocesses the selected raw rows with the same standardization
    /// choice, so statistics come from those rows only.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let (raw_x, y) = self.raw_rows(rows);
        preprocess(&raw_x, &y, self.transform.standardized)
    }

    /// Raw covariate rows and responses for `rows`.
    pub fn raw_rows(&self, rows: &[usize]) -> (Mat, Vector) {
        let raw_x = self.raw_x.select_rows(rows);
        let y = Vector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        (raw_x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Admm,
    Ladmm,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Admm => "admm",
            Algorithm::Ladmm => "ladmm",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = SpcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(Algorithm::Admm),
            "ladmm" => Ok(Algorithm::Ladmm),
            other => Err(SpcrError::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Tuning and solver settings for one fit.
///
/// For the linearized solver `rho2` is the penalty on the `β = β₀`
/// constraint and `rho3` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub w: f64,
    pub lambda_v: f64,
    pub lambda_beta: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub algorithm: Algorithm,
    /// Recorded for reproducibility; the SVD warm start itself is deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 1,
            w: 0.1,
            lambda_v: 0.0,
            lambda_beta: 0.0,
            rho1: 1.0,
            rho2: 1.0,
            rho3: 1.0,
            max_iter: 2000,
            tol_abs: 1e-5,
            tol_rel: 1e-4,
            algorithm: Algorithm::Admm,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            ..Default::default()
        }
    }

    pub fn with_lambdas(mut self, lambda_v: f64, lambda_beta: f64) -> Self {
        self.lambda_v = lambda_v;
        self.lambda_beta = lambda_beta;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let bad = |msg: String| Err(SpcrError::InvalidConfig(msg));
        if self.k < 1 || self.k > n.min(p) {
            return bad(format!("k = {} must lie in 1..={}", self.k, n.min(p)));
        }
        for (name, v) in [
            ("w", self.w),
            ("lambda_v", self.lambda_v),
            ("lambda_beta", self.lambda_beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and nonnegative"));
            }
        }
        for (name, v) in [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
            ("tol_abs", self.tol_abs),
            ("tol_rel", self.tol_rel),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be finite and positive"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

/// Final residuals and the thresholds they were tested against.
///
/// "Loadings" groups the consensus constraints on the loading copies and
/// "coefficients" the `β = β₀` constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub primal_loadings: f64,
    pub primal_coefficients: f64,
    pub dual_loadings: f64,
    pub dual_coefficients: f64,
    pub eps_pri_loadings: f64,
    pub eps_pri_coefficients: f64,
    pub eps_dual_loadings: f64,
    pub eps_dual_coefficients: f64,
}

impl Residuals {
    pub fn primal_ok(&self) -> bool {
        self.primal_loadings <= self.eps_pri_loadings
            && self.primal_coefficients <= self.eps_pri_coefficients
    }

    pub fn dual_ok(&self) -> bool {
        self.dual_loadings <= self.eps_dual_loadings
            && self.dual_coefficients <= self.eps_dual_coefficients
    }

    pub fn satisfied(&self) -> bool {
        self.primal_ok() && self.dual_ok()
    }

    pub fn primal_norm(&self) -> f64 {
        self.primal_loadings.hypot(self.primal_coefficients)
    }

    pub fn dual_norm(&self) -> f64 {
        self.dual_loadings.hypot(self.dual_coefficients)
    }

    /// Largest primal threshold, used to bound fixed-point drift.
    pub fn eps_pri(&self) -> f64 {
        self.eps_pri_loadings.max(self.eps_pri_coefficients)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub degenerate_iterates: usize,
    pub final_residuals: Residuals,
}

/// A fitted SPCRsvd model.
#[derive(Debug, Clone, PartialEq)]
pub struct SpcrsvdModel {
    pub algorithm: Algorithm,
    pub intercept: f64,
    /// Regression coefficients on the k components.
    pub beta: Vector,
    /// Soft-thresholded copy of `beta`.
    pub beta_sparse: Vector,
    /// Orthonormal loading matrix (p × k).
    pub loadings: Mat,
    /// Soft-thresholded loading copy `V₀` (p × k).
    pub sparse_loadings: Mat,
    /// Loading copy inside the regression loss (`V₁` for ADMM, `V₀` for
    /// LADMM); used for prediction.
    pub regression_loadings: Mat,
    /// Component scores `Z = XV` on the training data (n × k).
    pub scores: Mat,
    /// Per-covariate effects `V₀ β₀` on the preprocessed scale.
    pub composite_coefficients: Vector,
    pub transform: Transform,
    pub config: FitConfig,
    pub diagnostics: ConvergenceReport,
}

impl SpcrsvdModel {
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn p(&self) -> usize {
        self.loadings.nrows()
    }

    /// Coefficients applied to preprocessed covariates at prediction time.
    pub fn prediction_coefficients(&self) -> Vector {
        &self.regression_loadings * &self.beta
    }

    /// Predictions for rows already on the preprocessed scale.
    pub fn predict_processed(&self, x: &Mat) -> Result<Vector> {
        if x.ncols() != self.p() {
            return Err(SpcrError::DimensionMismatch(format!(
                "model has {} covariates, input has {}",
                self.p(),
                x.ncols()
            )));
        }
        let coef = self.prediction_coefficients();
        Ok((x * coef).add_scalar(self.intercept))
    }

    /// Applies the stored preprocessing to raw rows, then predicts.
    pub fn predict(&self, x_raw: &Mat) -> Result<Vector> {
        let x = self.transform.apply(x_raw)?;
        self.predict_processed(&x)
    }

    /// Objective value at the sparse consensus point `(β₀, β₀-copy, Z, V₀)`.
    pub fn objective(&self, d: &Dataset) -> Result<f64> {
        objective(
            d,
            &CandidatePoint {
                intercept: self.intercept,
                beta: &self.beta_sparse,
                z: &self.scores,
                v: &self.sparse_loadings,
            },
            &self.config,
        )
    }

    pub fn nonzero_loadings(&self) -> usize {
        self.sparse_loadings.iter().filter(|x| **x != 0.0).count()
    }

    pub fn nonzero_coefficients(&self) -> usize {
        self.beta_sparse.iter().filter(|x| **x != 0.0).count()
    }
}

/// Free-function form of [`SpcrsvdModel::predict`]; the dataset is only
/// checked for a matching covariate count, the model's own stored
/// transform is applied.
pub fn predict(model: &SpcrsvdModel, x_new_raw: &Mat, d: &Dataset) -> Result<Vector> {
    if d.p() != model.p() {
        return Err(SpcrError::DimensionMismatch(format!(
            "dataset has {} covariates, model has {}",
            d.p(),
            model.p()
        )));
    }
    model.predict(x_new_raw)
}

/// A point at which to evaluate the objective.
#[derive(Debug, Clone, Copy)]
pub struct CandidatePoint<'a> {
    pub intercept: f64,
    pub beta: &'a Vector,
    pub z: &'a Mat,
    pub v: &'a Mat,
}

/// The four terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub regression: f64,
    pub pca: f64,
    pub loading_penalty: f64,
    pub coefficient_penalty: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.regression + self.pca + self.loading_penalty + self.coefficient_penalty
    }
}

pub fn objective_terms(
    d: &Dataset,
    m: &CandidatePoint<'_>,
    cfg: &FitConfig,
) -> Result<ObjectiveTerms> {
    let (n, p) = (d.n(), d.p());
    let k = m.beta.len();
    if m.v.shape() != (p, k) || m.z.shape() != (n, k) {
        return Err(SpcrError::DimensionMismatch(format!(
            "candidate has V {:?}, Z {:?}, beta {k}; data is {n}x{p}",
            m.v.shape(),
            m.z.shape()
        )));
    }
    let nf = n as f64;
    let resid = (d.x() * (m.v * m.beta)).add_scalar(m.intercept) - d.y();
    let recon = d.x() - m.z * m.v.transpose();
    Ok(ObjectiveTerms {
        regression: resid.norm_squared() / nf,
        pca: cfg.w * recon.norm_squared() / nf,
        loading_penalty: cfg.lambda_v * m.v.iter().map(|x| x.abs()).sum::<f64>(),
        coefficient_penalty: cfg.lambda_beta * m.beta.iter().map(|x| x.abs()).sum::<f64>(),
    })
}

pub fn objective(d: &Dataset, m: &CandidatePoint<'_>, cfg: &FitConfig) -> Result<f64> {
    objective_terms(d, m, cfg).map(|t| t.total())
}
