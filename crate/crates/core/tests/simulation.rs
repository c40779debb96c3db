//! Monte Carlo designs and experiment aggregation.

use spcrsvd::kernels::Mat;
use spcrsvd::sim::{
    aggregate, generate_seeded, run_experiment, summarize, ExperimentConfig, Method, SimDesign,
};

fn sample_covariance(x: &Mat) -> Mat {
    let n = x.nrows() as f64;
    let means = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &means;
    }
    c.transpose() * &c / (n - 1.0)
}

#[test]
fn case1_sample_covariance_is_identity() {
    let d = SimDesign::case(1, 100_000, 1.0).unwrap();
    let s = generate_seeded(&d, 100_000, 2024).unwrap();
    let c = sample_covariance(&s.x);
    assert!((c - Mat::identity(10, 10)).abs().max() < 0.05);
}

#[test]
fn case2_second_column_has_variance_nine() {
    let d = SimDesign::case(2, 100_000, 1.0).unwrap();
    let s = generate_seeded(&d, 100_000, 7).unwrap();
    let c = sample_covariance(&s.x);
    assert!((c[(1, 1)] - 9.0).abs() < 0.45, "{}", c[(1, 1)]);
    assert!((c[(0, 0)] - 1.0).abs() < 0.05);
}

#[test]
fn case3_blocks_have_ar_structure() {
    let d = SimDesign::case(3, 50_000, 1.0).unwrap();
    let s = generate_seeded(&d, 50_000, 3).unwrap();
    let c = sample_covariance(&s.x);
    assert!((c[(0, 1)] - 0.9).abs() < 0.05);
    assert!((c[(3, 5)] - 0.81).abs() < 0.05);
    assert!(c[(2, 12)].abs() < 0.05);
}

#[test]
fn true_model_mse_estimates_noise_variance() {
    let d = SimDesign::case(1, 50, 1.5).unwrap();
    let cfg = ExperimentConfig {
        reps: 10,
        n_test: 2000,
        seed: 3,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&d, &[Method::TrueModel], &cfg).unwrap();
    let s = r.summary(Method::TrueModel).unwrap().mse;
    let sd_of_mean = s.sd / (cfg.reps as f64).sqrt();
    assert!((s.mean - 2.25).abs() <= 3.0 * sd_of_mean.max(0.02), "{s:?}");
}

#[test]
fn reports_are_reproducible_and_aggregates_recompute() {
    let d = SimDesign::case(3, 40, 1.0).unwrap();
    let cfg = ExperimentConfig {
        reps: 2,
        n_test: 200,
        grid_size: 3,
        seed: 99,
        ..ExperimentConfig::default()
    };
    let methods = [Method::SpcrsvdAdmm, Method::SpcrsvdLadmm, Method::Pls, Method::Pcr];
    let a = run_experiment(&d, &methods, &cfg).unwrap();
    let b = run_experiment(&d, &methods, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.replicates_csv(), b.replicates_csv());

    let again = aggregate(&a.records, &methods);
    for (x, y) in a.summaries.iter().zip(&again) {
        assert!((x.mse.mean - y.mse.mean).abs() <= 1e-12);
        assert!((x.mse.sd - y.mse.sd).abs() <= 1e-12);
    }
    for s in &a.summaries {
        let per: Vec<f64> = a.records.iter().filter(|r| r.method == s.method).map(|r| r.mse).collect();
        let direct = summarize(&per).unwrap();
        assert!((direct.mean - s.mse.mean).abs() <= 1e-12);
    }
    let spcr = a.summary(Method::SpcrsvdAdmm).unwrap();
    assert!(spcr.tpr.is_some() && spcr.tnr.is_some());
    assert!(a.summary(Method::Pcr).unwrap().tpr.is_none());
}

#[test]
fn single_replicate_reports_zero_sd_with_warning() {
    let d = SimDesign::case(1, 30, 1.0).unwrap();
    let cfg = ExperimentConfig {
        reps: 1,
        n_test: 100,
        grid_size: 2,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&d, &[Method::Pcr], &cfg).unwrap();
    assert_eq!(r.summary(Method::Pcr).unwrap().mse.sd, 0.0);
    assert!(r.warnings.iter().any(|w| w.contains("single replicate")));
}

#[test]
fn replicate_csv_leaves_undefined_rates_empty() {
    let d = SimDesign::case(2, 30, 1.0).unwrap();
    let cfg = ExperimentConfig {
        reps: 2,
        n_test: 50,
        grid_size: 2,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&d, &[Method::Pls], &cfg).unwrap();
    let csv = r.replicates_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "case,sigma,n,k,method,rep,mse,tpr,tnr");
    for line in lines {
        assert!(line.starts_with("2,1,30,1,PLS,"));
        assert!(line.ends_with(",,"));
    }
}

#[test]
fn case1_n50_admm_mse_is_in_range() {
    let d = SimDesign::case(1, 50, 1.0).unwrap();
    let cfg = ExperimentConfig {
        reps: 20,
        seed: 2,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&d, &[Method::SpcrsvdAdmm], &cfg).unwrap();
    let m = r.summary(Method::SpcrsvdAdmm).unwrap().mse.mean;
    assert!((1.0..=1.5).contains(&m), "mean MSE {m}");
}
