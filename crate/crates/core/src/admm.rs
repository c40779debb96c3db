//! ADMM solver.
//!
//! The loading matrix is split into three consensus copies: `V` carries the
//! orthonormality constraint and the PCA loss, `V₀` the lasso penalty, and
//! `V₁` the regression loss. The coefficient vector is split into `β` and its
//! sparse copy `β₀`. Each sweep updates, in order,
//! `V₁, V, V₀, Z, β, β₀, intercept` and then the scaled duals.

use crate::error::{Result, SpcrError};
use crate::kernels::{procrustes_orthogonalize, soft_threshold_mat, soft_threshold_vec, solve_spd, Mat, Vector};
use crate::model::{Algorithm, CandidatePoint, ConvergenceReport, Dataset, FitConfig, Residuals, SpcrsvdModel};
use crate::solver::{coefficient_step, intercept_step, max_norm, record, threshold, warm_start_loadings, Design};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub v: Mat,
    pub v0: Mat,
    pub v1: Mat,
    pub z: Mat,
    pub beta: Vector,
    pub beta0_vec: Vector,
    pub intercept: f64,
    pub lambda1: Mat,
    pub lambda2: Mat,
    pub lambda3: Vector,
    pub iter: usize,
}

/// SVD warm start: all loading copies equal the top-k right singular
/// vectors of X, `Z = XV`, zero coefficients and duals, intercept `mean(y)`.
pub fn initialize(d: &Dataset, cfg: &FitConfig) -> Result<AdmmState> {
    cfg.validate(d.n(), d.p())?;
    let (p, k) = (d.p(), cfg.k);
    let v = warm_start_loadings(d, k)?;
    Ok(AdmmState {
        z: d.x() * &v,
        v0: v.clone(),
        v1: v.clone(),
        v,
        beta: Vector::zeros(k),
        beta0_vec: Vector::zeros(k),
        intercept: d.y().mean(),
        lambda1: Mat::zeros(p, k),
        lambda2: Mat::zeros(p, k),
        lambda3: Vector::zeros(k),
        iter: 0,
    })
}

/// Exact minimizer over `V₁` of
/// `(1/n)‖y* − XV₁β‖² + (ρ₂/2)‖V₁ − V₀ + Λ₂‖²`, with `y* = y − β₀1`.
///
/// The normal equations `(XᵀX/n) V₁ ββᵀ + (ρ₂/2) V₁ = R` are solved through
/// the rank-one structure of `ββᵀ`: the component of `V₁` orthogonal to `β`
/// is `R/(ρ₂/2)` on that subspace, and the component along `u = β/‖β‖` comes
/// from one p × p SPD solve.
pub fn update_v1(s: &AdmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<Mat> {
    let c = cfg.rho2 / 2.0;
    let rhs = design.xty_centered(s.intercept) * s.beta.transpose() + (&s.v0 - &s.lambda2) * c;
    let b2 = s.beta.norm_squared();
    if b2 == 0.0 {
        return Ok(rhs / c);
    }
    let u = &s.beta / b2.sqrt();
    let ru = &rhs * &u;
    let p = design.p();
    let lhs = &design.gram * b2 + Mat::identity(p, p) * c;
    let along = solve_spd(&lhs, &Mat::from_column_slice(p, 1, ru.as_slice()))?;
    let ut = u.transpose();
    Ok((&rhs - &ru * &ut) / c + along * ut)
}

/// Procrustes step: `V = PQᵀ` for `(w/n)XᵀZ + (ρ₁/2)(V₀ − Λ₁) = PΩQᵀ`.
pub fn update_v(s: &AdmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<Mat> {
    let m = design.xt_times(&s.z) * cfg.w + (&s.v0 - &s.lambda1) * (cfg.rho1 / 2.0);
    procrustes_orthogonalize(&m)
}

/// Soft-threshold of `(ρ₁(V + Λ₁) + ρ₂(V₁ + Λ₂)) / (ρ₁ + ρ₂)` at
/// `λ_V / (ρ₁ + ρ₂)`.
pub fn update_v0(s: &AdmmState, cfg: &FitConfig) -> Mat {
    let total = cfg.rho1 + cfg.rho2;
    let blend = ((&s.v + &s.lambda1) * cfg.rho1 + (&s.v1 + &s.lambda2) * cfg.rho2) / total;
    soft_threshold_mat(&blend, cfg.lambda_v / total)
}

pub fn update_z(s: &AdmmState, design: &Design<'_>) -> Mat {
    design.x() * &s.v
}

pub fn update_beta(s: &AdmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<Vector> {
    coefficient_step(design, &s.v1, s.intercept, &s.beta0_vec, &s.lambda3, cfg.rho3)
}

pub fn update_beta0_vec(s: &AdmmState, cfg: &FitConfig) -> Vector {
    soft_threshold_vec(&(&s.beta + &s.lambda3), cfg.lambda_beta / cfg.rho3)
}

pub fn update_intercept(s: &AdmmState, design: &Design<'_>) -> f64 {
    intercept_step(design, &s.v1, &s.beta)
}

pub fn update_duals(s: &AdmmState) -> (Mat, Mat, Vector) {
    (
        &s.lambda1 + (&s.v - &s.v0),
        &s.lambda2 + (&s.v1 - &s.v0),
        &s.lambda3 + (&s.beta - &s.beta0_vec),
    )
}

/// One full sweep. Returns `true` when the Procrustes argument was rank
/// deficient and the previous `V` was kept.
pub fn sweep(s: &mut AdmmState, design: &Design<'_>, cfg: &FitConfig) -> Result<bool> {
    s.v1 = update_v1(s, design, cfg)?;
    let degenerate = match update_v(s, design, cfg) {
        Ok(v) => {
            s.v = v;
            false
        }
        Err(SpcrError::RankDeficient { .. }) => true,
        Err(e) => return Err(e),
    };
    s.v0 = update_v0(s, cfg);
    s.z = update_z(s, design);
    s.beta = update_beta(s, design, cfg)?;
    s.beta0_vec = update_beta0_vec(s, cfg);
    s.intercept = update_intercept(s, design);
    let (l1, l2, l3) = update_duals(s);
    s.lambda1 = l1;
    s.lambda2 = l2;
    s.lambda3 = l3;
    s.iter += 1;
    Ok(degenerate)
}

/// Primal and dual residuals after a sweep, given the sparse copies from
/// before it.
pub fn residuals(s: &AdmmState, prev_v0: &Mat, prev_beta0: &Vector, cfg: &FitConfig) -> Residuals {
    let (p, k) = s.v.shape();
    let dv0 = (&s.v0 - prev_v0).norm();
    let rho_v = cfg.rho1.hypot(cfg.rho2);
    let dual_scale = (cfg.rho1 * s.lambda1.norm()).hypot(cfg.rho2 * s.lambda2.norm());
    Residuals {
        primal_loadings: (&s.v - &s.v0).norm().max((&s.v1 - &s.v0).norm()),
        primal_coefficients: (&s.beta - &s.beta0_vec).norm(),
        dual_loadings: rho_v * dv0,
        dual_coefficients: cfg.rho3 * (&s.beta0_vec - prev_beta0).norm(),
        eps_pri_loadings: threshold(
            p * k,
            cfg.tol_abs,
            cfg.tol_rel,
            max_norm(&[s.v.norm(), s.v0.norm(), s.v1.norm()]),
        ),
        eps_pri_coefficients: threshold(
            k,
            cfg.tol_abs,
            cfg.tol_rel,
            max_norm(&[s.beta.norm(), s.beta0_vec.norm()]),
        ),
        eps_dual_loadings: threshold(p * k, cfg.tol_abs, cfg.tol_rel, dual_scale),
        eps_dual_coefficients: threshold(k, cfg.tol_abs, cfg.tol_rel, cfg.rho3 * s.lambda3.norm()),
    }
}

fn state_objective(s: &AdmmState, d: &Dataset, cfg: &FitConfig) -> Result<f64> {
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

/// Final solver state together with its diagnostics.
#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub state: AdmmState,
    pub report: ConvergenceReport,
}

/// Iterates sweeps from `state` until the stopping rule holds or
/// `cfg.max_iter` sweeps have run.
pub fn run_from(d: &Dataset, cfg: &FitConfig, mut state: AdmmState) -> Result<AdmmRun> {
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
    Ok(AdmmRun { state, report })
}

pub fn solve_admm(d: &Dataset, cfg: &FitConfig) -> Result<AdmmRun> {
    let state = initialize(d, cfg)?;
    run_from(d, cfg, state)
}

pub fn fit_admm(d: &Dataset, cfg: &FitConfig) -> Result<SpcrsvdModel> {
    let run = solve_admm(d, cfg)?;
    Ok(assemble(d, cfg, run))
}

fn assemble(d: &Dataset, cfg: &FitConfig, run: AdmmRun) -> SpcrsvdModel {
    let s = run.state;
    SpcrsvdModel {
        algorithm: Algorithm::Admm,
        intercept: s.intercept,
        composite_coefficients: &s.v0 * &s.beta0_vec,
        beta: s.beta,
        beta_sparse: s.beta0_vec,
        loadings: s.v,
        sparse_loadings: s.v0,
        regression_loadings: s.v1,
        scores: s.z,
        transform: d.transform().clone(),
        config: FitConfig {
            algorithm: Algorithm::Admm,
            ..cfg.clone()
        },
        diagnostics: run.report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::preprocess;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let y = Vector::from_fn(n, |i, _| x[(i, 0)] - 0.5 * x[(i, 1)] + rng.random_range(-0.3..0.3));
        preprocess(&x, &y, false).unwrap()
    }

    fn perturbed_state(d: &Dataset, k: usize, seed: u64) -> AdmmState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = initialize(d, &FitConfig::new(k)).unwrap();
        let p = d.p();
        s.beta = Vector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        s.beta0_vec = Vector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        s.lambda1 = Mat::from_fn(p, k, |_, _| rng.random_range(-0.2..0.2));
        s.lambda2 = Mat::from_fn(p, k, |_, _| rng.random_range(-0.2..0.2));
        s.lambda3 = Vector::from_fn(k, |_, _| rng.random_range(-0.2..0.2));
        s.intercept += 0.3;
        s
    }

    #[test]
    fn initialize_sets_zero_duals_and_coefficients() {
        let d = fixture(1, 20, 5);
        let s = initialize(&d, &FitConfig::new(2)).unwrap();
        assert_eq!(s.beta, Vector::zeros(2));
        assert_eq!(s.lambda1, Mat::zeros(5, 2));
        assert!((s.v.transpose() * &s.v - Mat::identity(2, 2)).norm() < 1e-10);
        assert!((s.intercept - d.y().mean()).abs() < 1e-14);
    }

    #[test]
    fn initialize_on_identity_design() {
        let d = Dataset::from_processed(Mat::identity(4, 4), dvector![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = initialize(&d, &FitConfig::new(2)).unwrap();
        assert!((s.v.transpose() * &s.v - Mat::identity(2, 2)).norm() < 1e-12);
        // each column is a signed standard basis vector
        for col in s.v.column_iter() {
            assert!((col.abs().max() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initialize_rejects_rank_deficient() {
        let x = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0; 4.0, 8.0];
        let d = preprocess(&x, &dvector![1.0, 2.0, 3.0, 4.0], false).unwrap();
        assert!(matches!(
            initialize(&d, &FitConfig::new(2)),
            Err(SpcrError::RankDeficient { .. })
        ));
    }

    #[test]
    fn v1_collapses_when_beta_zero() {
        let d = fixture(2, 15, 4);
        let design = Design::new(&d);
        let mut s = perturbed_state(&d, 2, 3);
        s.beta.fill(0.0);
        let v1 = update_v1(&s, &design, &FitConfig::new(2)).unwrap();
        assert!((v1 - (&s.v0 - &s.lambda2)).abs().max() < 1e-14);
    }

    #[test]
    fn v1_penalty_dominated_limit() {
        let d = fixture(4, 15, 4);
        let design = Design::new(&d);
        let s = perturbed_state(&d, 2, 5);
        let mut cfg = FitConfig::new(2);
        cfg.rho2 = 1e8;
        let v1 = update_v1(&s, &design, &cfg).unwrap();
        assert!((v1 - (&s.v0 - &s.lambda2)).abs().max() < 1e-4);
    }

    #[test]
    fn v_is_v0_when_pca_term_off() {
        let d = fixture(6, 15, 4);
        let design = Design::new(&d);
        let s = initialize(&d, &FitConfig::new(2)).unwrap();
        let cfg = FitConfig::new(2).with_w(0.0);
        let v = update_v(&s, &design, &cfg).unwrap();
        assert!((v - &s.v0).abs().max() < 1e-10);
    }

    #[test]
    fn v_single_component_is_normalized_argument() {
        let d = fixture(7, 15, 4);
        let design = Design::new(&d);
        let s = perturbed_state(&d, 1, 8);
        let cfg = FitConfig::new(1);
        let m = design.xt_times(&s.z) * cfg.w + (&s.v0 - &s.lambda1) * 0.5;
        let v = update_v(&s, &design, &cfg).unwrap();
        assert!((v - &m / m.norm()).abs().max() < 1e-12);
    }

    #[test]
    fn v0_threshold_limits() {
        let d = fixture(9, 12, 4);
        let s = perturbed_state(&d, 2, 10);
        let blend = ((&s.v + &s.lambda1) + (&s.v1 + &s.lambda2)) / 2.0;
        let v0 = update_v0(&s, &FitConfig::new(2));
        assert!((v0 - &blend).abs().max() < 1e-15);
        let huge = FitConfig::new(2).with_lambdas(2.0 * blend.abs().max() + 1.0, 0.0);
        assert_eq!(update_v0(&s, &huge), Mat::zeros(4, 2));
    }

    #[test]
    fn z_is_xv() {
        let x = dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0];
        let d = Dataset::from_processed(x.clone(), dvector![0.0, 1.0]).unwrap();
        let design = Design::new(&d);
        let mut s = initialize(&d, &FitConfig::new(2)).unwrap();
        s.v = dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0];
        let z = update_z(&s, &design);
        assert_eq!(z, x.columns(1, 2).into_owned());

        let d0 = Dataset::from_processed(Mat::zeros(3, 2), dvector![0.0, 1.0, 2.0]).unwrap();
        let design0 = Design::new(&d0);
        assert_eq!(update_z(&s_with_v(&s, dmatrix![1.0; 0.0]), &design0), Mat::zeros(3, 1));
    }

    fn s_with_v(s: &AdmmState, v: Mat) -> AdmmState {
        AdmmState { v, ..s.clone() }
    }

    #[test]
    fn beta_limits() {
        let d = fixture(11, 12, 3);
        let design = Design::new(&d);
        let mut s = perturbed_state(&d, 2, 12);
        s.v1 = Mat::zeros(3, 2);
        let beta = update_beta(&s, &design, &FitConfig::new(2)).unwrap();
        assert!((beta - (&s.beta0_vec - &s.lambda3)).abs().max() < 1e-14);

        let s = perturbed_state(&d, 2, 13);
        let mut cfg = FitConfig::new(2);
        cfg.rho3 = 1e9;
        let beta = update_beta(&s, &design, &cfg).unwrap();
        assert!((beta - (&s.beta0_vec - &s.lambda3)).abs().max() < 1e-6);
    }

    #[test]
    fn beta0_vec_examples() {
        let d = fixture(14, 12, 3);
        let mut s = perturbed_state(&d, 2, 15);
        s.beta = dvector![0.1, -2.0];
        s.lambda3 = Vector::zeros(2);
        let out = update_beta0_vec(&s, &FitConfig::new(2).with_lambdas(0.0, 0.5));
        assert!((out - dvector![0.0, -1.5]).abs().max() < 1e-15);
        let out = update_beta0_vec(&s, &FitConfig::new(2));
        assert_eq!(out, s.beta);
    }

    #[test]
    fn intercept_examples() {
        let d = fixture(16, 12, 3);
        let design = Design::new(&d);
        let mut s = perturbed_state(&d, 2, 17);
        // centered design: intercept is mean(y) whatever β is
        assert!((update_intercept(&s, &design) - d.y().mean()).abs() < 1e-12);
        s.beta.fill(0.0);
        assert!((update_intercept(&s, &design) - d.y().mean()).abs() < 1e-14);
    }

    #[test]
    fn intercept_on_uncentered_design() {
        let x = dmatrix![1.0, 2.0; 3.0, 1.0; 0.0, 4.0];
        let y = dvector![1.0, 2.0, 6.0];
        let d = Dataset::from_processed(x, y).unwrap();
        let design = Design::new(&d);
        let mut s = initialize(&d, &FitConfig::new(1)).unwrap();
        s.v1 = dmatrix![1.0; -1.0];
        s.beta = dvector![2.0];
        // y − X V₁ β = (1 − 2(1−2), 2 − 2(3−1), 6 − 2(0−4)) = (3, −2, 14)
        assert!((update_intercept(&s, &design) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn duals_accumulate_gaps() {
        let d = fixture(18, 12, 3);
        let mut s = perturbed_state(&d, 1, 19);
        s.v0 = s.v.clone();
        let (l1, _, _) = update_duals(&s);
        assert_eq!(l1, s.lambda1);

        s.lambda1.fill(0.0);
        s.v0 = &s.v - dmatrix![0.1; 0.2; -0.3];
        let (l1, _, _) = update_duals(&s);
        assert!((l1 - dmatrix![0.1; 0.2; -0.3]).abs().max() < 1e-15);
    }

    #[test]
    fn duals_telescope_over_sweeps() {
        let d = fixture(20, 30, 4);
        let design = Design::new(&d);
        let cfg = FitConfig::new(2).with_lambdas(0.05, 0.05);
        let mut s = initialize(&d, &cfg).unwrap();
        let mut gaps = Mat::zeros(4, 2);
        for _ in 0..3 {
            sweep(&mut s, &design, &cfg).unwrap();
            gaps += &s.v - &s.v0;
        }
        assert!((s.lambda1 - gaps).abs().max() < 1e-12);
    }

    #[test]
    fn v_stays_orthonormal_every_sweep() {
        let d = fixture(21, 40, 5);
        let design = Design::new(&d);
        let cfg = FitConfig::new(3).with_lambdas(0.1, 0.05);
        let mut s = initialize(&d, &cfg).unwrap();
        for _ in 0..50 {
            sweep(&mut s, &design, &cfg).unwrap();
            assert!((s.v.transpose() * &s.v - Mat::identity(3, 3)).norm() <= 1e-8);
            assert!(s.v1.iter().chain(s.lambda2.iter()).all(|x| x.is_finite()));
        }
    }

    #[test]
    fn fit_converges_on_simple_fixture() {
        let d = fixture(22, 50, 4);
        let cfg = FitConfig::new(2).with_lambdas(0.01, 0.01);
        let m = fit_admm(&d, &cfg).unwrap();
        assert!(m.diagnostics.converged, "{:?}", m.diagnostics.final_residuals);
        assert!(m.diagnostics.final_residuals.primal_ok());
        assert!((m.loadings.transpose() * &m.loadings - Mat::identity(2, 2)).norm() < 1e-6);
    }
}
