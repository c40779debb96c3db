//! Two-stage reference methods: principal component regression and
//! partial least squares (NIPALS, univariate response).

use rayon::prelude::*;

use crate::error::{Result, SpcrError};
use crate::kernels::{solve_spd, thin_svd, Mat, Vector, RANK_CUTOFF};
use crate::model::{Dataset, Transform};
use crate::selection::{assign_folds, build_folds, mse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Pcr,
    Pls,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineWarning {
    /// `Xᵀy` vanished after `extracted` components; extraction stopped early.
    ZeroCovariance { extracted: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// Components actually used.
    pub k: usize,
    pub intercept: f64,
    /// Coefficients on the preprocessed covariates.
    pub coefficients: Vector,
    pub transform: Transform,
    pub warnings: Vec<BaselineWarning>,
}

impl BaselineModel {
    pub fn predict(&self, x_raw: &Mat) -> Result<Vector> {
        let x = self.transform.apply(x_raw)?;
        Ok((x * &self.coefficients).add_scalar(self.intercept))
    }

    pub fn predict_processed(&self, x: &Mat) -> Result<Vector> {
        if x.ncols() != self.coefficients.len() {
            return Err(SpcrError::DimensionMismatch(format!(
                "model has {} covariates, input has {}",
                self.coefficients.len(),
                x.ncols()
            )));
        }
        Ok((x * &self.coefficients).add_scalar(self.intercept))
    }
}

fn intercept_for(d: &Dataset, coef: &Vector) -> f64 {
    d.y_mean() - d.x().row_mean().transpose().dot(coef)
}

fn centered(d: &Dataset) -> (Mat, Vector) {
    let means = d.x().row_mean();
    let mut x = d.x().clone();
    for mut row in x.row_iter_mut() {
        row -= &means;
    }
    (x, d.y().add_scalar(-d.y_mean()))
}

fn check_k(d: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > d.p() || k > d.n() - 1 {
        return Err(SpcrError::InvalidConfig(format!(
            "component count {k} must lie in 1..={}",
            d.p().min(d.n() - 1)
        )));
    }
    Ok(())
}

/// Least squares on the top-`k` principal component scores, mapped back
/// to per-covariate coefficients.
pub fn fit_pcr(d: &Dataset, k: usize) -> Result<BaselineModel> {
    check_k(d, k)?;
    let (x, y) = centered(d);
    let svd = thin_svd(&x)?;
    let smax = svd.s.iter().copied().fold(0.0, f64::max);
    if svd.s[k - 1] < RANK_CUTOFF * smax.max(1.0) {
        return Err(SpcrError::RankDeficient {
            min_singular_value: svd.s[k - 1],
        });
    }
    let w = svd.right_vectors(k);
    let scores = &x * &w;
    let gamma = solve_spd(
        &(scores.transpose() * &scores),
        &Mat::from_column_slice(k, 1, (scores.transpose() * &y).as_slice()),
    )?;
    let coefficients = &w * gamma.column(0);
    Ok(BaselineModel {
        kind: BaselineKind::Pcr,
        k,
        intercept: intercept_for(d, &coefficients),
        coefficients,
        transform: d.transform().clone(),
        warnings: Vec::new(),
    })
}

/// PLS1 by NIPALS. Stops early, with a warning, if the deflated
/// covariance with the response vanishes.
pub fn fit_pls(d: &Dataset, k: usize) -> Result<BaselineModel> {
    check_k(d, k)?;
    let (mut xa, y) = centered(d);
    let p = d.p();
    let scale = xa.norm() * y.norm();
    let mut weights: Vec<Vector> = Vec::with_capacity(k);
    let mut loadings: Vec<Vector> = Vec::with_capacity(k);
    let mut yq: Vec<f64> = Vec::with_capacity(k);
    let mut warnings = Vec::new();

    for a in 0..k {
        let mut w = xa.transpose() * &y;
        let wn = w.norm();
        if wn <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            warnings.push(BaselineWarning::ZeroCovariance { extracted: a });
            break;
        }
        w /= wn;
        let t = &xa * &w;
        let tt = t.norm_squared();
        let pl = xa.transpose() * &t / tt;
        yq.push(y.dot(&t) / tt);
        xa -= &t * pl.transpose();
        weights.push(w);
        loadings.push(pl);
    }

    let used = weights.len();
    let coefficients = if used == 0 {
        Vector::zeros(p)
    } else {
        let w = Mat::from_columns(&weights);
        let pl = Mat::from_columns(&loadings);
        let ptw = pl.transpose() * &w;
        let q = Vector::from_vec(yq);
        let r = ptw
            .lu()
            .solve(&q)
            .ok_or(SpcrError::RankDeficient { min_singular_value: 0.0 })?;
        w * r
    };
    Ok(BaselineModel {
        kind: BaselineKind::Pls,
        k: used,
        intercept: intercept_for(d, &coefficients),
        coefficients,
        transform: d.transform().clone(),
        warnings,
    })
}

pub fn fit_baseline(d: &Dataset, kind: BaselineKind, k: usize) -> Result<BaselineModel> {
    match kind {
        BaselineKind::Pcr => fit_pcr(d, k),
        BaselineKind::Pls => fit_pls(d, k),
    }
}

/// Chooses the component count in `1..=k_max` by K-fold CV (smallest count
/// wins ties) and refits on all rows. Returns the model and the CV curve.
pub fn select_components(
    d: &Dataset,
    kind: BaselineKind,
    k_max: usize,
    folds: usize,
    seed: u64,
) -> Result<(BaselineModel, Vec<f64>)> {
    let assignment = assign_folds(d.n(), folds, seed)?;
    let fold_data = build_folds(d, &assignment, folds, k_max + 1)?;
    let curve: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut total = 0.0;
            for f in &fold_data {
                let kk = k.min(f.train.p()).min(f.train.n() - 1);
                let m = fit_baseline(&f.train, kind, kk)?;
                total += mse(&f.test_y, &m.predict(&f.test_x)?)?;
            }
            Ok(total / folds as f64)
        })
        .collect::<Result<_>>()?;
    let best = curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < curve[b] { i } else { b });
    Ok((fit_baseline(d, kind, best + 1)?, curve))
}
