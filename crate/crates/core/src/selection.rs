//! K-fold cross-validation over a `(λ_V, λ_β)` grid and evaluation metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SpcrError};
use crate::kernels::{Mat, Vector};
use crate::model::{Dataset, FitConfig, SpcrsvdModel};
use crate::solver::fit;

/// Entries with magnitude at or below this count as zero for support recovery.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Fold layout and grid for one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub grid_lambda_v: Vec<f64>,
    pub grid_lambda_beta: Vec<f64>,
    /// Fold index of every observation.
    pub fold_assignment: Vec<usize>,
    pub seed: u64,
    /// Restricts selection to grid points whose fold fits all converged
    /// (falls back to the whole grid when none did).
    pub require_convergence: bool,
}

/// Seeded shuffle, then round-robin: fold sizes differ by at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(SpcrError::InvalidConfig(format!(
            "fold count {folds} must lie in 2..={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Data-driven scale `max_j |x_jᵀ y| / n` on the preprocessed design,
/// falling back to 1 when it vanishes.
pub fn lambda_scale(d: &Dataset) -> f64 {
    let s = (d.x().transpose() * d.y()).abs().max() / d.n() as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Log-spaced grid spanning `[1e-3, 1e1] · lambda_scale(d)`.
pub fn default_grid(d: &Dataset, count: usize) -> Vec<f64> {
    let s = lambda_scale(d);
    log_grid(1e-3 * s, 1e1 * s, count)
}

impl CvPlan {
    pub fn new(
        n: usize,
        folds: usize,
        grid_lambda_v: Vec<f64>,
        grid_lambda_beta: Vec<f64>,
        seed: u64,
    ) -> Result<CvPlan> {
        if grid_lambda_v.is_empty() || grid_lambda_beta.is_empty() {
            return Err(SpcrError::InvalidConfig("lambda grid is empty".into()));
        }
        if grid_lambda_v
            .iter()
            .chain(&grid_lambda_beta)
            .any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(SpcrError::InvalidConfig(
                "grid values must be finite and nonnegative".into(),
            ));
        }
        Ok(CvPlan {
            fold_assignment: assign_folds(n, folds, seed)?,
            folds,
            grid_lambda_v,
            grid_lambda_beta,
            seed,
            require_convergence: true,
        })
    }

    /// Plan with the same data-driven grid on both axes.
    pub fn with_default_grid(d: &Dataset, folds: usize, points: usize, seed: u64) -> Result<CvPlan> {
        let g = default_grid(d, points);
        CvPlan::new(d.n(), folds, g.clone(), g, seed)
    }

    /// `(training rows, held-out rows)` for one fold.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, &f) in self.fold_assignment.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// CV criterion, rows indexed by `λ_V`, columns by `λ_β`.
    pub cv_surface: Mat,
    pub grid_lambda_v: Vec<f64>,
    pub grid_lambda_beta: Vec<f64>,
    pub best_lambda_v: f64,
    pub best_lambda_beta: f64,
    pub best_index: (usize, usize),
    pub fold_assignment: Vec<usize>,
    /// Fold fits that hit the iteration cap.
    pub nonconverged_fits: usize,
    /// Converged fold fits per grid point, same layout as `cv_surface`.
    pub converged_folds: Vec<Vec<usize>>,
    pub refit_model: SpcrsvdModel,
}

/// Held-out folds with preprocessing learned on the complementary rows.
pub(crate) struct FoldData {
    pub train: Dataset,
    pub test_x: Mat,
    pub test_y: Vector,
}

pub(crate) fn build_folds(d: &Dataset, assignment: &[usize], folds: usize, min_train: usize) -> Result<Vec<FoldData>> {
    (0..folds)
        .map(|f| {
            let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
                (0..d.n()).partition(|&i| assignment[i] != f);
            if train_rows.len() < min_train {
                return Err(SpcrError::FoldTooSmall {
                    train_size: train_rows.len(),
                    required: min_train,
                });
            }
            if test_rows.is_empty() {
                return Err(SpcrError::InvalidConfig(format!("fold {f} is empty")));
            }
            let train = d.subset(&train_rows)?;
            let (test_x, test_y) = d.raw_rows(&test_rows);
            Ok(FoldData {
                train,
                test_x,
                test_y,
            })
        })
        .collect()
}

/// Cross-validates every grid point, picks the minimizer (exact ties go to
/// the smaller `λ_V`, then the smaller `λ_β`) and refits on all of `d`.
///
/// Each fold's error is the mean squared prediction error over that fold's
/// held-out rows; the criterion averages these over folds.
pub fn cross_validate(d: &Dataset, base_cfg: &FitConfig, plan: &CvPlan) -> Result<CvResult> {
    if plan.fold_assignment.len() != d.n() {
        return Err(SpcrError::DimensionMismatch(format!(
            "fold assignment covers {} rows, dataset has {}",
            plan.fold_assignment.len(),
            d.n()
        )));
    }
    base_cfg.validate(d.n(), d.p())?;
    let folds = build_folds(d, &plan.fold_assignment, plan.folds, base_cfg.k + 1)?;

    let (nv, nb) = (plan.grid_lambda_v.len(), plan.grid_lambda_beta.len());
    let tasks: Vec<(usize, usize, usize)> = (0..nv)
        .flat_map(|i| (0..nb).flat_map(move |j| (0..plan.folds).map(move |f| (i, j, f))))
        .collect();
    let outcomes: Vec<Result<(f64, bool)>> = tasks
        .par_iter()
        .map(|&(i, j, f)| {
            let cfg = base_cfg
                .clone()
                .with_lambdas(plan.grid_lambda_v[i], plan.grid_lambda_beta[j]);
            let fold = &folds[f];
            let model = fit(&fold.train, &cfg)?;
            let pred = model.predict(&fold.test_x)?;
            Ok((mse(&fold.test_y, &pred)?, model.diagnostics.converged))
        })
        .collect();

    let mut surface = Mat::zeros(nv, nb);
    let mut nonconverged = 0;
    let mut converged_folds = vec![vec![0; nb]; nv];
    for (&(i, j, _), outcome) in tasks.iter().zip(outcomes) {
        let (err, converged) = outcome?;
        surface[(i, j)] += err / plan.folds as f64;
        if converged {
            converged_folds[i][j] += 1;
        } else {
            nonconverged += 1;
        }
    }
    if surface.iter().any(|v| !v.is_finite()) {
        return Err(SpcrError::NonFinite("cross-validation surface"));
    }

    let eligible: Vec<Vec<bool>> = converged_folds
        .iter()
        .map(|row| row.iter().map(|&c| !plan.require_convergence || c == plan.folds).collect())
        .collect();
    let (bi, bj) = if eligible.iter().flatten().any(|&e| e) {
        select_best(&surface, &plan.grid_lambda_v, &plan.grid_lambda_beta, &eligible)
    } else {
        select_best(&surface, &plan.grid_lambda_v, &plan.grid_lambda_beta, &vec![vec![true; nb]; nv])
    };
    let cfg = base_cfg
        .clone()
        .with_lambdas(plan.grid_lambda_v[bi], plan.grid_lambda_beta[bj]);
    let refit_model = fit(d, &cfg)?;
    Ok(CvResult {
        cv_surface: surface,
        grid_lambda_v: plan.grid_lambda_v.clone(),
        grid_lambda_beta: plan.grid_lambda_beta.clone(),
        best_lambda_v: plan.grid_lambda_v[bi],
        best_lambda_beta: plan.grid_lambda_beta[bj],
        best_index: (bi, bj),
        fold_assignment: plan.fold_assignment.clone(),
        nonconverged_fits: nonconverged,
        converged_folds,
        refit_model,
    })
}

fn select_best(surface: &Mat, gv: &[f64], gb: &[f64], eligible: &[Vec<bool>]) -> (usize, usize) {
    let mut best: Option<(usize, usize)> = None;
    for i in 0..gv.len() {
        for j in 0..gb.len() {
            if !eligible[i][j] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let (cur, top) = (surface[(i, j)], surface[b]);
                    cur < top || (cur == top && (gv[i], gb[j]) < (gv[b.0], gb[b.1]))
                }
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    best.unwrap_or((0, 0))
}

/// Mean squared difference.
pub fn mse(y_true: &Vector, y_pred: &Vector) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(SpcrError::DimensionMismatch(format!(
            "mse: {} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(SpcrError::DimensionMismatch("mse of empty vectors".into()));
    }
    Ok((y_true - y_pred).norm_squared() / y_true.len() as f64)
}

/// Support-recovery rates for one replicate. A rate is `None` when its
/// denominator set is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRates {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
}

pub fn tpr_tnr(estimated: &Vector, truth: &Vector, zero_tol: f64) -> Result<SupportRates> {
    if estimated.len() != truth.len() {
        return Err(SpcrError::DimensionMismatch(format!(
            "support: {} estimates vs {} true coefficients",
            estimated.len(),
            truth.len()
        )));
    }
    let (mut pos, mut neg, mut tp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (e, t) in estimated.iter().zip(truth.iter()) {
        let est_nonzero = e.abs() > zero_tol;
        if *t != 0.0 {
            pos += 1;
            tp += est_nonzero as usize;
        } else {
            neg += 1;
            tn += !est_nonzero as usize;
        }
    }
    Ok(SupportRates {
        tpr: (pos > 0).then(|| tp as f64 / pos as f64),
        tnr: (neg > 0).then(|| tn as f64 / neg as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub mse: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn folds_are_balanced() {
        for (n, k) in [(10, 3), (12, 12), (101, 5), (7, 2)] {
            let a = assign_folds(n, k, 42).unwrap();
            let mut sizes = vec![0; k];
            a.iter().for_each(|&f| sizes[f] += 1);
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(*lo >= 1 && hi - lo <= 1, "{sizes:?}");
        }
        assert!(assign_folds(5, 1, 0).is_err());
        assert!(assign_folds(5, 6, 0).is_err());
    }

    #[test]
    fn fold_assignment_is_seeded() {
        assert_eq!(assign_folds(50, 5, 9).unwrap(), assign_folds(50, 5, 9).unwrap());
        assert_ne!(assign_folds(50, 5, 9).unwrap(), assign_folds(50, 5, 10).unwrap());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[4] - 10.0).abs() < 1e-12);
        assert!((g[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&dvector![1.0, 2.0], &dvector![1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&dvector![0.0, 0.0], &dvector![1.0, -1.0]).unwrap(), 1.0);
        assert!(mse(&dvector![0.0], &dvector![1.0, -1.0]).is_err());
    }

    #[test]
    fn support_rates_examples() {
        let truth = dvector![2.0, 1.0, 0.0, 0.0];
        let r = tpr_tnr(&truth, &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((r.tpr, r.tnr), (Some(1.0), Some(1.0)));
        let r = tpr_tnr(&Vector::zeros(4), &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((r.tpr, r.tnr), (Some(0.0), Some(1.0)));

        let mut truth10 = Vector::zeros(10);
        truth10[0] = 2.0;
        truth10[1] = 1.0;
        let mut est = Vector::zeros(10);
        est[0] = 1.9;
        est[2] = 0.3;
        let r = tpr_tnr(&est, &truth10, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.tpr, Some(0.5));
        assert_eq!(r.tnr, Some(7.0 / 8.0));
    }

    #[test]
    fn undefined_rate_is_missing() {
        let r = tpr_tnr(&dvector![1.0, 0.0], &dvector![1.0, 2.0], DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.tnr, None);
        assert_eq!(r.tpr, Some(0.5));
    }

    fn all(r: usize, c: usize) -> Vec<Vec<bool>> {
        vec![vec![true; c]; r]
    }

    #[test]
    fn ineligible_points_are_skipped() {
        let surface = Mat::from_row_slice(2, 2, &[0.1, 0.5, 0.4, 0.7]);
        let mask = vec![vec![false, true], vec![true, true]];
        assert_eq!(select_best(&surface, &[0.1, 0.2], &[0.1, 0.2], &mask), (1, 0));
    }

    #[test]
    fn tie_break_prefers_least_shrinkage() {
        let surface = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.7]);
        assert_eq!(select_best(&surface, &[0.1, 0.01], &[0.1, 0.2], &all(2, 2)), (1, 0));
        let flat = Mat::from_element(2, 2, 1.0);
        assert_eq!(select_best(&flat, &[0.3, 0.3], &[0.2, 0.2], &all(2, 2)), (0, 0));
    }
}
