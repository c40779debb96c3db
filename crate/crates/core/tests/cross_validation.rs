//! Cross-validation checked against a direct per-fold loop, plus the
//! leakage, relabelling and tie-break properties.

use spcrsvd::error::SpcrError;
use spcrsvd::kernels::{Mat, Vector};
use spcrsvd::model::{preprocess, Algorithm, Dataset, FitConfig};
use spcrsvd::selection::{cross_validate, mse, CvPlan};
use spcrsvd::sim::{generate_seeded, SimDesign};
use spcrsvd::solver::fit;

fn case1(n: usize, seed: u64) -> Dataset {
    let design = SimDesign::case(1, n, 1.0).unwrap();
    let s = generate_seeded(&design, n, seed).unwrap();
    preprocess(&s.x, &s.y, false).unwrap()
}

/// Direct computation: for each grid point and fold, preprocess the raw
/// training rows, fit, predict the raw held-out rows, average fold MSEs.
fn reference_surface(d: &Dataset, cfg: &FitConfig, plan: &CvPlan, standardize: bool) -> Mat {
    let mut out = Mat::zeros(plan.grid_lambda_v.len(), plan.grid_lambda_beta.len());
    for (i, &lv) in plan.grid_lambda_v.iter().enumerate() {
        for (j, &lb) in plan.grid_lambda_beta.iter().enumerate() {
            let mut total = 0.0;
            for f in 0..plan.folds {
                let train: Vec<usize> = (0..d.n()).filter(|&r| plan.fold_assignment[r] != f).collect();
                let test: Vec<usize> = (0..d.n()).filter(|&r| plan.fold_assignment[r] == f).collect();
                let xtr = d.raw_x().select_rows(&train);
                let ytr = Vector::from_iterator(train.len(), train.iter().map(|&r| d.y()[r]));
                let xte = d.raw_x().select_rows(&test);
                let yte = Vector::from_iterator(test.len(), test.iter().map(|&r| d.y()[r]));
                let dtr = preprocess(&xtr, &ytr, standardize).unwrap();
                let m = fit(&dtr, &cfg.clone().with_lambdas(lv, lb)).unwrap();
                let pred = m.predict(&xte).unwrap();
                let fold_mse = pred.iter().zip(yte.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / test.len() as f64;
                total += fold_mse;
            }
            out[(i, j)] = total / plan.folds as f64;
        }
    }
    out
}

#[test]
fn surface_matches_direct_loop() {
    let d = case1(60, 5);
    let plan = CvPlan::new(60, 5, vec![0.001, 0.01, 0.1], vec![0.001, 0.01, 0.1], 3).unwrap();
    for algorithm in [Algorithm::Admm, Algorithm::Ladmm] {
        let cfg = FitConfig::new(1).with_algorithm(algorithm);
        let cv = cross_validate(&d, &cfg, &plan).unwrap();
        let reference = reference_surface(&d, &cfg, &plan, false);
        let err = (&cv.cv_surface - &reference).abs().max();
        assert!(err <= 1e-12 * reference.max(), "{algorithm:?}: {err}");
        let (bi, bj) = cv.best_index;
        assert_eq!(cv.best_lambda_v, plan.grid_lambda_v[bi]);
        assert_eq!(cv.best_lambda_beta, plan.grid_lambda_beta[bj]);
        assert_eq!(cv.refit_model.config.lambda_v, cv.best_lambda_v);
    }
}

#[test]
fn held_out_rows_use_training_statistics_only() {
    let mut d_raw = case1(40, 6).raw_x().clone();
    let y = case1(40, 6).y().clone();
    let plan = CvPlan::new(40, 4, vec![0.05], vec![0.01], 8).unwrap();
    for r in 0..40 {
        if plan.fold_assignment[r] == 0 {
            d_raw[(r, 0)] = d_raw[(r, 0)] * 4.0 + 6.0;
        }
    }
    let d = preprocess(&d_raw, &y, true).unwrap();
    let cfg = FitConfig::new(1);
    let cv = cross_validate(&d, &cfg, &plan).unwrap();
    let honest = reference_surface(&d, &cfg, &plan, true)[(0, 0)];
    assert!((cv.cv_surface[(0, 0)] - honest).abs() <= 1e-12 * honest);

    // Leaky variant: statistics from all rows, folds cut afterwards.
    let mut leaked = 0.0;
    for f in 0..4 {
        let train: Vec<usize> = (0..40).filter(|&r| plan.fold_assignment[r] != f).collect();
        let test: Vec<usize> = (0..40).filter(|&r| plan.fold_assignment[r] == f).collect();
        let xtr = d.x().select_rows(&train);
        let ytr = Vector::from_iterator(train.len(), train.iter().map(|&r| y[r]));
        let dtr = Dataset::from_processed(xtr, ytr).unwrap();
        let m = fit(&dtr, &cfg.clone().with_lambdas(0.05, 0.01)).unwrap();
        let pred = m.predict_processed(&d.x().select_rows(&test)).unwrap();
        let yte = Vector::from_iterator(test.len(), test.iter().map(|&r| y[r]));
        leaked += mse(&yte, &pred).unwrap() / 4.0;
    }
    assert!((leaked - honest).abs() > 1e-6, "leaked {leaked} vs honest {honest}");
}

#[test]
fn fold_relabelling_leaves_surface_unchanged() {
    let d = case1(45, 7);
    let plan = CvPlan::new(45, 3, vec![0.01, 0.1], vec![0.02], 1).unwrap();
    let perm = [2usize, 0, 1];
    let relabelled = CvPlan {
        fold_assignment: plan.fold_assignment.iter().map(|&f| perm[f]).collect(),
        ..plan.clone()
    };
    let cfg = FitConfig::new(1);
    let a = cross_validate(&d, &cfg, &plan).unwrap();
    let b = cross_validate(&d, &cfg, &relabelled).unwrap();
    assert!((&a.cv_surface - &b.cv_surface).abs().max() <= 1e-12 * a.cv_surface.max());
    assert_eq!(a.best_index, b.best_index);
}

#[test]
fn single_point_grid_echoes_input() {
    let d = case1(30, 8);
    let plan = CvPlan::new(30, 5, vec![0.07], vec![0.03], 2).unwrap();
    let cv = cross_validate(&d, &FitConfig::new(1), &plan).unwrap();
    assert_eq!((cv.best_lambda_v, cv.best_lambda_beta), (0.07, 0.03));
    assert_eq!(cv.cv_surface.shape(), (1, 1));
}

#[test]
fn duplicate_points_resolve_to_first() {
    let d = case1(30, 9);
    let plan = CvPlan::new(30, 3, vec![0.02, 0.02], vec![0.01, 0.01], 2).unwrap();
    let cv = cross_validate(&d, &FitConfig::new(1), &plan).unwrap();
    assert_eq!(cv.best_index, (0, 0));
    let s = &cv.cv_surface;
    assert!(s.iter().all(|v| *v == s[(0, 0)]));
}

#[test]
fn leave_one_out_runs() {
    let d = case1(12, 10);
    let plan = CvPlan::new(12, 12, vec![0.01, 0.1], vec![0.01], 0).unwrap();
    let cv = cross_validate(&d, &FitConfig::new(1), &plan).unwrap();
    assert!(cv.cv_surface.iter().all(|v| v.is_finite()));
    let mut sizes = [0usize; 12];
    for &f in &cv.fold_assignment {
        sizes[f] += 1;
    }
    assert!(sizes.iter().all(|&s| s == 1));
}

#[test]
fn small_training_folds_are_rejected() {
    let d = case1(6, 11);
    let plan = CvPlan::new(6, 2, vec![0.01], vec![0.01], 0).unwrap();
    let err = cross_validate(&d, &FitConfig::new(4), &plan).unwrap_err();
    assert_eq!(err, SpcrError::FoldTooSmall { train_size: 3, required: 5 });
}

#[test]
fn convergence_restriction_only_changes_selection() {
    let d = case1(50, 12);
    let grid = vec![0.001, 0.03, 3.0, 30.0];
    let strict = CvPlan::new(50, 5, grid.clone(), vec![0.001, 0.1], 4).unwrap();
    let loose = CvPlan {
        require_convergence: false,
        ..strict.clone()
    };
    let cfg = FitConfig::new(1);
    let a = cross_validate(&d, &cfg, &strict).unwrap();
    let b = cross_validate(&d, &cfg, &loose).unwrap();
    assert_eq!(a.cv_surface, b.cv_surface);
    assert_eq!(a.converged_folds, b.converged_folds);
    let (i, j) = a.best_index;
    assert_eq!(a.converged_folds[i][j], 5);
    let raw_min = b.cv_surface.min();
    assert_eq!(b.cv_surface[b.best_index], raw_min);
    let total: usize = a.converged_folds.iter().flatten().sum();
    assert_eq!(total + a.nonconverged_fits, grid.len() * 2 * 5);
}
