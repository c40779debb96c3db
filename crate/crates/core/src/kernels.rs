//! Dense linear-algebra and proximal primitives shared by both solvers.
//!
//! Factorizations are delegated to `nalgebra`; this module fixes the
//! conventions the solvers rely on (descending singular values, a
//! deterministic sign for every singular pair, and the rank cutoff).

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SpcrError};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below this are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// `sign(x) * max(|x| - lambda, 0)`.
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding of a matrix.
pub fn soft_threshold_mat(m: &Mat, lambda: f64) -> Mat {
    m.map(|x| soft_threshold(x, lambda))
}

/// Elementwise soft-thresholding of a vector.
pub fn soft_threshold_vec(v: &Vector, lambda: f64) -> Vector {
    v.map(|x| soft_threshold(x, lambda))
}

pub fn ensure_finite_mat(m: &Mat, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SpcrError::NonFinite(what))
    }
}

pub fn ensure_finite_vec(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SpcrError::NonFinite(what))
    }
}

/// Thin singular value decomposition `M = U diag(s) Vt`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// m × r, orthonormal columns.
    pub u: Mat,
    /// r singular values, nonincreasing.
    pub s: Vector,
    /// r × q, orthonormal rows.
    pub vt: Mat,
}

impl ThinSvd {
    /// Top-`k` right singular vectors as a q × k matrix.
    pub fn right_vectors(&self, k: usize) -> Mat {
        self.vt.rows(0, k).transpose()
    }

    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us * &self.vt
    }
}

/// Thin SVD with singular values sorted in decreasing order and each
/// singular pair signed so the largest-magnitude entry of the left vector is
/// positive.
pub fn thin_svd(m: &Mat) -> Result<ThinSvd> {
    ensure_finite_mat(m, "svd input")?;
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(rows, 0),
            s: Vector::zeros(0),
            vt: Mat::zeros(0, cols),
        });
    }
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let mut s_diag = faer::diag::Diag::<f64>::zeros(r);
    let mut u_f = faer::Mat::<f64>::zeros(rows, r);
    let mut v_f = faer::Mat::<f64>::zeros(cols, r);
    let par = faer::Par::Seq;
    let params = Default::default();
    let mut mem = MemBuffer::new(svd::svd_scratch::<f64>(
        rows,
        cols,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        params,
    ));
    svd::svd(
        a.as_ref(),
        s_diag.as_mut(),
        Some(u_f.as_mut()),
        Some(v_f.as_mut()),
        par,
        MemStack::new(&mut mem),
        params,
    )
    .map_err(|_| SpcrError::Decomposition("singular value decomposition"))?;
    let u_raw = Mat::from_fn(rows, r, |i, j| u_f[(i, j)]);
    let vt_raw = Mat::from_fn(r, cols, |i, j| v_f[(j, i)]);
    let s_col = s_diag.column_vector();
    let s_raw = Vector::from_fn(r, |i, _| s_col[i]);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));

    let mut u = Mat::zeros(rows, r);
    let mut vt = Mat::zeros(r, cols);
    let mut s = Vector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u_raw.column(src).into_owned();
        let mut vrow = vt_raw.row(src).into_owned();
        let pivot = ucol
            .iter()
            .copied()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            ucol.neg_mut();
            vrow.neg_mut();
        }
        u.set_column(dst, &ucol);
        vt.set_row(dst, &vrow);
        s[dst] = s_raw[src].max(0.0);
    }
    Ok(ThinSvd { u, s, vt })
}

/// Nearest matrix with orthonormal columns: `P Qᵀ` where `M = P Ω Qᵀ`.
///
/// This is the maximizer of `tr(Vᵀ M)` over `VᵀV = I`. It is unique only
/// when `M` has full column rank, so a singular value below
/// [`RANK_CUTOFF`] is reported as [`SpcrError::RankDeficient`].
pub fn procrustes_orthogonalize(m: &Mat) -> Result<Mat> {
    let (p, k) = m.shape();
    if p < k {
        return Err(SpcrError::DimensionMismatch(format!(
            "procrustes needs rows >= cols, got {p}x{k}"
        )));
    }
    let svd = thin_svd(m)?;
    let smin = svd.s.iter().copied().fold(f64::INFINITY, f64::min);
    if k > 0 && smin < RANK_CUTOFF {
        return Err(SpcrError::RankDeficient {
            min_singular_value: smin,
        });
    }
    Ok(&svd.u * &svd.vt)
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(SpcrError::DimensionMismatch(format!(
            "solve_spd: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let chol = Cholesky::new(a.clone()).ok_or(SpcrError::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Vector right-hand side variant of [`solve_spd`].
pub fn solve_spd_vec(a: &Mat, b: &Vector) -> Result<Vector> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(SpcrError::DimensionMismatch(format!(
            "solve_spd: A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let chol = Cholesky::new(a.clone()).ok_or(SpcrError::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue_sym(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ordinary least squares with intercept, via a thin SVD of the centered
/// design. Returns `(intercept, coefficients)`.
pub fn ols(x: &Mat, y: &Vector) -> Result<(f64, Vector)> {
    let n = x.nrows();
    if n != y.len() {
        return Err(SpcrError::DimensionMismatch(format!(
            "ols: X has {n} rows, y has {}",
            y.len()
        )));
    }
    let means = x.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &means;
    }
    let ybar = y.mean();
    let yc = y.add_scalar(-ybar);
    let svd = thin_svd(&xc)?;
    let smax = svd.s.iter().copied().fold(0.0, f64::max);
    let mut coef = Vector::zeros(x.ncols());
    let uty = svd.u.transpose() * &yc;
    for j in 0..svd.s.len() {
        if svd.s[j] <= RANK_CUTOFF * smax.max(1.0) {
            return Err(SpcrError::RankDeficient {
                min_singular_value: svd.s[j],
            });
        }
        coef += svd.vt.row(j).transpose() * (uty[j] / svd.s[j]);
    }
    let intercept = ybar - (means * &coef)[0];
    Ok((intercept, coef))
}
